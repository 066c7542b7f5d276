"""Physical constants (CODATA 2018 via scipy) and unit conversions."""

from scipy import constants as _c

CODATA_VERSION = "CODATA-2018"

HBAR = _c.hbar
EPS0 = _c.epsilon_0
MU0 = _c.mu_0
C_LIGHT = _c.c
E_CHARGE = _c.e
BOHR = _c.physical_constants["Bohr radius"][0]
HARTREE = _c.physical_constants["Hartree energy"][0]

#: hartree -> angular frequency (rad/s)
HARTREE_TO_RAD_S = HARTREE / HBAR
#: atomic unit of dipole moment, e * a0 (C m)
AU_DIPOLE = E_CHARGE * BOHR
