"""lightake - light filtering and supervised keyphrase extraction for news stories."""

__version__ = "0.1.0"
