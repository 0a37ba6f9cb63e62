"""Two-stage classification of IP hosting types from passive DNS and WHOIS history."""

__version__ = "0.1.0"
