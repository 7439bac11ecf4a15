# Application Utilities __init__
