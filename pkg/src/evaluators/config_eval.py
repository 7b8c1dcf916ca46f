#!/usr/bin/env python3

import re
from asteval import Interpreter
from asteval.astutils import FROM_PY, FROM_MATH, FROM_NUMPY, NUMPY_RENAMES

from ..errors import ParseError

###################################################################################

# GLOBAL VARIABLES

ALLOWED_KINDS = ('int', 'float', 'ints', 'floats')
SYMBOL_PAT = re.compile('[a-zA-Z_][a-zA-Z0-9_]*')
NUMBER_PAT = re.compile(r'(?<![a-zA-Z0-9_.])(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?')

###################################################################################


class ConfigEval:
    """
        Safe evaluation of numeric configuration values such as ``1/50``, ``log(4)`` or ``32, 64, 128``
    """

    # =======================================================================================

    # CONSTRUCTOR

    def __init__(self, sym_table: dict = None):
        """

        :param sym_table: a dictionary of named constants usable inside values, e.g. {'n_train': 128}

        The interpreter is built once and reused for every value.
        """
        self.sym_table = dict(sym_table or {})
        self.interpreter = Interpreter()
        for name, value in self.sym_table.items():
            self.interpreter.symtable[name] = value

    # /CONSTRUCTOR

    # =======================================================================================

    # METHOD free_symbols

    def free_symbols(self, text: str) -> set:
        """

        :param text: a value expression
        :return: names used in the expression that are neither builtins nor bound constants
        """
        # numeric literals first, so the exponent of 1e-3 is not read as a name
        return set(
            sym for sym in SYMBOL_PAT.findall(NUMBER_PAT.sub(' ', text))
            if not any(sym in L for L in [FROM_PY, FROM_MATH, FROM_NUMPY, NUMPY_RENAMES])
            and sym not in self.sym_table
        )

    # /METHOD free_symbols

    # =======================================================================================

    # METHOD evaluate

    def evaluate(self, text: str, kind: str = 'float', key: str = None):
        """

        :param text: the raw value from a config file or command line flag
        :param kind: one of ALLOWED_KINDS
        :param key: config key, only used in error messages
        :return: int, float or tuple of them
        """
        if kind not in ALLOWED_KINDS:
            raise ValueError('kind is not in ALLOWED_KINDS. Please use one of ' + str(ALLOWED_KINDS))
        unknown = self.free_symbols(text)
        if unknown:
            raise ParseError(f"unknown name(s) {sorted(unknown)} in value '{text}'", column=key)
        try:
            result = self.interpreter.eval(text, show_errors=False, raise_errors=True)
        except Exception as err:
            raise ParseError(f"cannot evaluate '{text}': {err}", column=key) from err
        finally:
            self.interpreter.error = []

        if kind in ('ints', 'floats'):
            items = result if isinstance(result, (tuple, list)) else (result,)
            cast = int if kind == 'ints' else float
            return tuple(self._cast(item, cast, text, key) for item in items)
        if isinstance(result, (tuple, list)):
            raise ParseError(f"expected a single number, got '{text}'", column=key)
        return self._cast(result, int if kind == 'int' else float, text, key)

    # /METHOD evaluate

    # =======================================================================================

    # METHOD _cast

    @staticmethod
    def _cast(value, cast, text, key):
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ParseError(f"value '{text}' is not numeric", column=key) from None
        if cast is int:
            if number != int(number):
                raise ParseError(f"value '{text}' is not an integer", column=key)
            return int(number)
        return number

    # /METHOD _cast

    # =======================================================================================

    # METHOD __call__

    __call__ = evaluate

    # /METHOD __call__

# /CLASS ConfigEval

#############################################################################
