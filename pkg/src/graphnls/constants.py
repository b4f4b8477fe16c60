import math

SQRT3 = math.sqrt(3.0)

#: critical mass of the real line, pi*sqrt(3)/2
MU_LINE = math.pi * SQRT3 / 2.0
#: critical mass of the half-line
MU_HALFLINE = MU_LINE / 2.0
