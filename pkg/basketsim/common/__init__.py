"""
Package: common
Logging, error handling and command-line plumbing shared by the CLI and
the estimation service
"""
