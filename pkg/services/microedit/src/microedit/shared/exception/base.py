from __future__ import annotations


class MicroEditError(Exception):
    """Base error; `category` is the machine-parsable token shown by the CLI."""

    category: str = 'runtime'
    exit_code: int = 2

    def __init__(
        self,
        message: str = 'An error occurred',
        category: str | None = None,
        details: dict | None = None,
    ):
        self.message = message
        if category is not None:
            self.category = category
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> dict:
        return {
            'error': self.__class__.__name__,
            'category': self.category,
            'message': self.message,
            'details': self.details,
        }

    def cli_line(self) -> str:
        return f'error:{self.category}:{self.message}'
