"""Exception hierarchy shared across the package.

Each class carries an ``exit_code`` used by the command line front end.
"""


class StericZipError(Exception):
    exit_code = 1


class ParseError(StericZipError, ValueError):
    """Malformed input text (PDB line, JSON document, config file)."""

    exit_code = 2


class StructureError(StericZipError, ValueError):
    """Structurally invalid molecular model (duplicates, missing atoms)."""

    exit_code = 2


class AddressError(StericZipError, KeyError):
    """A chain/residue/atom address that does not resolve."""

    exit_code = 4

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class FormatError(StericZipError, ValueError):
    exit_code = 4


class DomainError(StericZipError, ValueError):
    """Function evaluated outside its domain (r <= 0, w = 0, coincident atoms)."""

    exit_code = 3


class DivergenceError(StericZipError, ArithmeticError):
    """Non-finite objective or gradient during a gradient-based run."""

    exit_code = 3

    def __init__(self, message, last_x=None, last_f=None):
        super().__init__(message)
        self.last_x = last_x
        self.last_f = last_f


class FetchError(StericZipError, OSError):
    exit_code = 5

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class CorruptDownloadError(FetchError):
    pass
