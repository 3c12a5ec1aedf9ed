__version__ = '0.1.0a0'
git_version = None
