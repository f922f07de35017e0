"""Operation kind codes shared by the compiled and pure-Python tape cores."""

INPUT = 0
CONST = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
NEG = 6
SIN = 7
COS = 8
EXP = 9
LOG = 10
SQRT = 11
TANH = 12
POWC = 13   # x ** c, constant exponent
ADDC = 14   # x + c
MULC = 15   # x * c
RSUBC = 16  # c - x
RDIVC = 17  # c / x
LOGISTIC = 18  # 1 / (1 + exp(-k * (x - x0)))

BINARY_KINDS = (ADD, SUB, MUL, DIV)
UNARY_KINDS = (NEG, SIN, COS, EXP, LOG, SQRT, TANH)
UNARY_CONST_KINDS = (POWC, ADDC, MULC, RSUBC, RDIVC)

KIND_NAMES = {
    INPUT: "input", CONST: "const", ADD: "add", SUB: "sub", MUL: "mul",
    DIV: "div", NEG: "neg", SIN: "sin", COS: "cos", EXP: "exp", LOG: "log",
    SQRT: "sqrt", TANH: "tanh", POWC: "pow_const", ADDC: "add_const",
    MULC: "mul_const", RSUBC: "rsub_const", RDIVC: "rdiv_const",
    LOGISTIC: "logistic",
}


class TapeDomainError(ArithmeticError):
    """A primitive was applied outside its domain (log/sqrt of a
    non-positive value, division by zero).  Aborts the simulation run."""

    def __init__(self, kind, value):
        self.kind = kind
        self.value = value
        super().__init__(f"domain violation in '{KIND_NAMES.get(kind, kind)}': "
                         f"operand value {value!r}")
