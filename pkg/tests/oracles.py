"""Frozen expected values.

Every number here comes from a closed-form computation (recorded next to
it), never from the code under test.
"""
import math

PI = math.pi

# Winding map into the equator of S^2 on a flat torus of length L, winding w.
# Jacobi modes exp(2 pi i p t/L) exp(i q theta):
#   normal branch      (2 pi p/L)^2 + q^2 - alpha^2,   alpha = 2 pi w/L
#   tangential branch  (2 pi p/L)^2 + q^2
# L = 8 pi, w = 2 -> alpha = 1/2:
#   p=0,q=0 normal: -1/4;  p=+-1 normal: 1/16 - 1/4 = -3/16 (twice);
#   p=+-2 normal and p=0 tangential: 0 (three times);  p=+-1 tangential: 1/16.
WINDING_8PI_W2_LOWEST = (-0.25, -0.1875, -0.1875, 0.0, 0.0, 0.0)
WINDING_8PI_W2_NEXT = 0.0625
WINDING_W2_COUNTS = (3, 3, 6)  # index, nullity, extended: p in {0,+-1} negative; p=+-2, rotation zero
WINDING_W1_COUNTS = (1, 3, 4)  # p=0 negative; p=+-1 normal and the rotation zero

# Constant map into S^2: the only nonpositive modes are the constant tangent fields.
CONSTANT_COUNTS = (0, 2, 2)

# Geodesic segment of length L on S^2 (one normal direction):
#   normal (k pi/L)^2 - 1, tangential (k pi/L)^2, k >= 1.
#   L = 4 pi: (k/4)^2 - 1 < 0 for k = 1,2,3, = 0 for k = 4 -> (3, 1).
#   L = pi: (k)^2 - 1 = 0 for k = 1 -> (0, 1).   L = pi/2: lowest normal 4 - 1 = 3 -> (0, 0).
GEODESIC_4PI = (3, 1)
GEODESIC_PI = (0, 1)
GEODESIC_HALF_PI_LOWEST_NORMAL = 3.0
# Segment of length 2 pi w: k pi/(2 pi w) < 1 for k < 2w -> index 2w - 1, nullity 1.
SEGMENT_LIMIT = {1: (1, 1, 2), 2: (3, 1, 4)}

# Limit-side totals under the no-bubble reduction (constant u_inf plus segment).
LEDGER_W2 = {"extended": 6, "rhs_extended": 2 + 4, "index": 3, "rhs_index": 0 + 3}
LEDGER_W1 = {"extended": 4, "rhs_extended": 2 + 2, "index": 1, "rhs_index": 0 + 1}


def q_sin_normal(L):
    """Q of v = sin(pi s/L) e_normal on a unit-speed segment: (L/2)((pi/L)^2 - 1)."""
    return L / 2 * ((PI / L) ** 2 - 1)


# Conjugate points of J'' + J = 0, J(0) = 0: zeros of sin at k pi.
def conjugate_count(L):
    """Interior zeros in (0, L); L must avoid multiples of pi."""
    return math.ceil(L / PI) - 1


# Lorentz norms of step functions (layer cake in closed form).
def one_level(c, a):
    return 2 * c * math.sqrt(a), c * math.sqrt(a)


def two_level_L21(c1, a1, c2, a2):
    """c1 > c2 > 0 on disjoint sets of area a1, a2."""
    return 2 * (c2 * math.sqrt(a1 + a2) + (c1 - c2) * math.sqrt(a1))


def two_level_L2inf(c1, a1, c2, a2):
    return max(c1 * math.sqrt(a1), c2 * math.sqrt(a1 + a2))


# Winding map: Lambda over the full torus is the image length 2 pi w.
LAMBDA_W2 = 4 * PI

# Dirichlet neck between points at great-circle distance 2.
NECK_DISTANCE = 2.0
