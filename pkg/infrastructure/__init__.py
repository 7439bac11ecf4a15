# Infrastructure Layer __init__
