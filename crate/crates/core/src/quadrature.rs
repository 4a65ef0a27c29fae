//! Fixed quadrature rules on the reference triangle and the unit interval.
//!
//! Triangle points are barycentric triples; weights sum to the reference
//! triangle area 1/2, so a physical integral is `2 |E| * sum(w * f)`.
//! Interval rules live on `[0, 1]` with weights summing to 1.

/// A symmetric triangle rule.
#[derive(Debug, Clone, Copy)]
pub struct TriangleRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
    pub degree: usize,
}

/// A Gauss rule on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
    pub degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl EdgeRule {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

const fn s21(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[a, a, b], [a, b, a], [b, a, a]]
}

const fn s111(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

const D4_A1: f64 = 0.445_948_490_915_964_886_32;
const D4_W1: f64 = 0.111_690_794_839_005_732_85;
const D4_A2: f64 = 0.091_576_213_509_770_743_46;
const D4_W2: f64 = 0.054_975_871_827_660_933_819;

const D4_ORBIT1: [[f64; 3]; 3] = s21(D4_A1);
const D4_ORBIT2: [[f64; 3]; 3] = s21(D4_A2);

static D4_POINTS: [[f64; 3]; 6] = [
    D4_ORBIT1[0],
    D4_ORBIT1[1],
    D4_ORBIT1[2],
    D4_ORBIT2[0],
    D4_ORBIT2[1],
    D4_ORBIT2[2],
];
static D4_WEIGHTS: [f64; 6] = [D4_W1, D4_W1, D4_W1, D4_W2, D4_W2, D4_W2];

const D6_A1: f64 = 0.249_286_745_170_910_421_29;
const D6_W1: f64 = 0.058_393_137_863_189_683_013;
const D6_A2: f64 = 0.063_089_014_491_502_228_34;
const D6_W2: f64 = 0.025_422_453_185_103_408_46;
const D6_A3: f64 = 0.053_145_049_844_816_947_353;
const D6_B3: f64 = 0.310_352_451_033_784_405_42;
const D6_W3: f64 = 0.041_425_537_809_186_787_597;

const D6_ORBIT1: [[f64; 3]; 3] = s21(D6_A1);
const D6_ORBIT2: [[f64; 3]; 3] = s21(D6_A2);
const D6_ORBIT3: [[f64; 3]; 6] = s111(D6_A3, D6_B3);

static D6_POINTS: [[f64; 3]; 12] = [
    D6_ORBIT1[0],
    D6_ORBIT1[1],
    D6_ORBIT1[2],
    D6_ORBIT2[0],
    D6_ORBIT2[1],
    D6_ORBIT2[2],
    D6_ORBIT3[0],
    D6_ORBIT3[1],
    D6_ORBIT3[2],
    D6_ORBIT3[3],
    D6_ORBIT3[4],
    D6_ORBIT3[5],
];
static D6_WEIGHTS: [f64; 12] = [
    D6_W1, D6_W1, D6_W1, D6_W2, D6_W2, D6_W2, D6_W3, D6_W3, D6_W3, D6_W3, D6_W3, D6_W3,
];

/// Six-point rule, exact for polynomials of degree 4.
pub const TRIANGLE_DEG4: TriangleRule = TriangleRule {
    points: &D4_POINTS,
    weights: &D4_WEIGHTS,
    degree: 4,
};

/// Twelve-point rule, exact for polynomials of degree 6.
pub const TRIANGLE_DEG6: TriangleRule = TriangleRule {
    points: &D6_POINTS,
    weights: &D6_WEIGHTS,
    degree: 6,
};

// sqrt(3/5) / 2
const GL3_OFFSET: f64 = 0.387_298_334_620_741_688_52;

static GL3_POINTS: [f64; 3] = [0.5 - GL3_OFFSET, 0.5, 0.5 + GL3_OFFSET];
static GL3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Three-point Gauss-Legendre rule on `[0, 1]`, exact to degree 5.
pub const EDGE_GAUSS3: EdgeRule = EdgeRule {
    points: &GL3_POINTS,
    weights: &GL3_WEIGHTS,
    degree: 5,
};
