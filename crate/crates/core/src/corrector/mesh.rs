use crate::error::invalid;
use crate::Result;
use nalgebra::Point3;

/// Tensor-product hexahedral mesh of `[-lx/2, lx/2] x [-ly/2, ly/2] x [0, lz]`.
///
/// With grading exponent `beta > 1` the nodes cluster toward the bottom edges:
/// horizontally `x = (l/2) sgn(s) (1 - (1 - |s|)^beta)` for uniform `s` in
/// `[-1, 1]`, vertically `z = lz t^beta` for uniform `t` in `[0, 1]`. Doubling
/// the cell counts refines the mesh, so the discrete spaces are nested.
///
/// Nodes are numbered `ix + (n1 + 1) (iy + (n2 + 1) iz)`, so the Dirichlet
/// layer `iz = 0` comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct HexMesh {
    pub cells: [usize; 3],
    pub lengths: [f64; 3],
    pub grading: f64,
}

/// Offsets of the local nodes of a cell; local index `a = ax + 2 ay + 4 az`.
pub(crate) const LOCAL: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

impl HexMesh {
    pub fn new(cells: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        if cells.contains(&0) {
            return Err(invalid("every direction needs at least one cell"));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid("box lengths must be positive"));
        }
        Ok(Self {
            cells,
            lengths,
            grading: 1.0,
        })
    }

    pub fn with_grading(mut self, beta: f64) -> Result<Self> {
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(invalid(format!("grading exponent must be at least 1, got {beta}")));
        }
        self.grading = beta;
        Ok(self)
    }

    pub fn is_uniform(&self) -> bool {
        self.grading == 1.0
    }

    /// Coordinate of node plane `i` along axis `k`.
    pub fn axis_coord(&self, k: usize, i: usize) -> f64 {
        let n = self.cells[k] as f64;
        let l = self.lengths[k];
        let beta = self.grading;
        if k == 2 {
            let t = i as f64 / n;
            return if beta == 1.0 { l * t } else { l * t.powf(beta) };
        }
        let s = 2.0 * i as f64 / n - 1.0;
        if beta == 1.0 {
            return 0.5 * l * s;
        }
        0.5 * l * s.signum() * (1.0 - (1.0 - s.abs()).powf(beta))
    }

    /// `n x n x round(n h)` cells on `S_1 x (0, h)`.
    pub fn unit_box(n: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid(format!("box height must be positive, got {h}")));
        }
        let nz = ((n as f64 * h).round() as usize).max(1);
        Self::new([n, n, nz], [1.0, 1.0, h])
    }

    /// The same mesh with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.cells, self.lengths.map(|l| l * s))?.with_grading(self.grading)
    }

    /// Edge lengths of a cell.
    pub fn cell_size(&self, cell: usize) -> [f64; 3] {
        let c = self.cell_coords(cell);
        [0, 1, 2].map(|k| self.axis_coord(k, c[k] + 1) - self.axis_coord(k, c[k]))
    }

    pub fn nodes_per_dim(&self) -> [usize; 3] {
        self.cells.map(|c| c + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_dim().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Nodes on the bottom face.
    pub fn dirichlet_count(&self) -> usize {
        let [a, b, _] = self.nodes_per_dim();
        a * b
    }

    pub fn free_dofs(&self) -> usize {
        3 * (self.node_count() - self.dirichlet_count())
    }

    pub fn node_index(&self, i: [usize; 3]) -> usize {
        let [a, b, _] = self.nodes_per_dim();
        i[0] + a * (i[1] + b * i[2])
    }

    pub fn node_coords(&self, id: usize) -> [usize; 3] {
        let [a, b, _] = self.nodes_per_dim();
        [id % a, (id / a) % b, id / (a * b)]
    }

    pub fn node_position(&self, id: usize) -> Point3<f64> {
        let c = self.node_coords(id);
        Point3::new(self.axis_coord(0, c[0]), self.axis_coord(1, c[1]), self.axis_coord(2, c[2]))
    }

    pub fn is_dirichlet(&self, id: usize) -> bool {
        id < self.dirichlet_count()
    }

    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.cells[0] * (c[1] + self.cells[1] * c[2])
    }

    pub fn cell_coords(&self, id: usize) -> [usize; 3] {
        let [a, b, _] = self.cells;
        [id % a, (id / a) % b, id / (a * b)]
    }

    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let c = self.cell_coords(cell);
        LOCAL.map(|o| self.node_index([c[0] + o[0], c[1] + o[1], c[2] + o[2]]))
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.cell_size(cell).iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Cells touching a node, each with the node's local index in that cell,
    /// in a fixed order.
    pub(crate) fn node_cells(&self, id: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.node_coords(id);
        LOCAL.iter().enumerate().filter_map(move |(a, o)| {
            let mut c = [0usize; 3];
            for k in 0..3 {
                if p[k] < o[k] || p[k] - o[k] >= self.cells[k] {
                    return None;
                }
                c[k] = p[k] - o[k];
            }
            Some((self.cell_index(c), a))
        })
    }
}
