//! `steps.csv`, legacy ASCII VTK snapshots and the run summary.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{RunConfig, RunSummary, StepRecord};
use crate::dgspace::DgFunction;
use crate::error::{AmotError, Result};

pub const CSV_HEADER: &str = "k,t,tau,dofs,eps_T,eps_S,eta,rejects_T,rejects_S,wall_ms";

const SUMMARY_FILE: &str = "summary.txt";

/// Files of one run directory.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    steps: BufWriter<File>,
}

impl Output {
    /// Creates the directory and `steps.csv`; fails before any computation if
    /// either is not writable.
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| AmotError::io(dir, e))?;
        let path = dir.join("steps.csv");
        let file = File::create(&path).map_err(|e| AmotError::io(&path, e))?;
        let mut steps = BufWriter::new(file);
        writeln!(steps, "{CSV_HEADER}").map_err(|e| AmotError::io(&path, e))?;
        steps.flush().map_err(|e| AmotError::io(&path, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            steps,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&mut self, r: &StepRecord) -> Result<()> {
        writeln!(
            self.steps,
            "{},{},{},{},{},{},{},{},{},{:.3}",
            r.k, r.t, r.tau, r.dofs, r.eps_t, r.eps_s, r.eta, r.rejects_t, r.rejects_s, r.wall_ms
        )
        .map_err(|e| AmotError::io(self.dir.join("steps.csv"), e))
    }

    pub fn snapshot(&mut self, k: usize, t: f64, u: &DgFunction) -> Result<()> {
        let path = self.dir.join(format!("solution_{k:06}.vtk"));
        write_vtk(&path, u, &format!("u at t={t}"))
    }

    pub fn finish(&mut self, config: &RunConfig, s: &RunSummary) -> Result<()> {
        self.steps
            .flush()
            .map_err(|e| AmotError::io(self.dir.join("steps.csv"), e))?;
        let path = self.dir.join(SUMMARY_FILE);
        let mesh = s.final_solution.mesh();
        let exp = &config.experiment;
        let text = format!(
            "experiment = {}\nmode = {}\ntol = {}\nalpha = {}\ntheta = {}\nepsilon = {}\nsigma = {}\n\
             tfinal = {}\nmesh_n = {}\nsteps = {}\nfinal_time = {}\nrejects_T = {}\nrejects_S = {}\n\
             max_dofs = {}\nfinal_dofs = {}\nfinal_triangles = {}\nfinal_vertices = {}\n\
             final_max_generation = {}\nfinal_min_angle_deg = {}\nmax_u = {}\nmin_u = {}\n\
             initial_max_u = {}\ninitial_min_u = {}\nwall_ms = {:.1}\n",
            exp.kind,
            config.mode,
            config.amot.tol,
            config.amot.alpha,
            config.amot.theta,
            exp.epsilon,
            config.sigma,
            exp.t_final,
            config.mesh_n,
            s.steps(),
            s.final_time(),
            s.records.iter().map(|r| r.rejects_t).sum::<usize>(),
            s.records.iter().map(|r| r.rejects_s).sum::<usize>(),
            s.max_dofs(),
            mesh.num_dofs(),
            mesh.num_triangles(),
            mesh.num_vertices(),
            mesh.max_generation(),
            mesh.min_angle().to_degrees(),
            s.extremes.max,
            s.extremes.min,
            s.initial_extremes.max,
            s.initial_extremes.min,
            s.wall_ms,
        );
        fs::write(&path, text).map_err(|e| AmotError::io(&path, e))
    }
}

/// Writes `u` as a legacy ASCII unstructured grid with three private points
/// per triangle, so the discontinuous field is represented exactly.
pub fn write_vtk(path: &Path, u: &DgFunction, title: &str) -> Result<()> {
    let io = |e| AmotError::io(path, e);
    let mesh = u.mesh();
    let n = mesh.num_triangles();
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.replace('\n', " "))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", 3 * n)?;
        for t in 0..n {
            for p in mesh.corners(t) {
                writeln!(w, "{} {} 0", p[0], p[1])?;
            }
        }
        writeln!(w, "CELLS {} {}", n, 4 * n)?;
        for t in 0..n {
            writeln!(w, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2)?;
        }
        writeln!(w, "CELL_TYPES {n}")?;
        for _ in 0..n {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {}", 3 * n)?;
        writeln!(w, "SCALARS u double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in u.coeffs() {
            writeln!(w, "{v:.11e}")?;
        }
        w.flush()
    })();
    body.map_err(io)
}

/// Contents of a snapshot written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub cell_types: Vec<u8>,
    pub values: Vec<f64>,
}

struct Tokens<'a> {
    path: &'a Path,
    words: std::vec::IntoIter<String>,
}

impl Tokens<'_> {
    fn error(&self, msg: String) -> AmotError {
        AmotError::Config {
            path: self.path.to_path_buf(),
            line: 0,
            msg,
        }
    }

    fn word(&mut self, expected: &str) -> Result<()> {
        match self.words.next() {
            Some(w) if w == expected => Ok(()),
            other => Err(self.error(format!("expected '{expected}', found {other:?}"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let w = self.words.next();
        w.as_deref()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| self.error(format!("malformed number {w:?}")))
    }
}

/// Reads the subset of the legacy format produced by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let file = File::open(path).map_err(|e| AmotError::io(path, e))?;
    let mut words = Vec::new();
    for line in BufReader::new(file).lines().skip(2) {
        let line = line.map_err(|e| AmotError::io(path, e))?;
        words.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut tk = Tokens {
        path,
        words: words.into_iter(),
    };
    for w in ["ASCII", "DATASET", "UNSTRUCTURED_GRID", "POINTS"] {
        tk.word(w)?;
    }
    let np: usize = tk.number()?;
    tk.word("double")?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        let p: [f64; 3] = [tk.number()?, tk.number()?, tk.number()?];
        points.push([p[0], p[1]]);
    }
    tk.word("CELLS")?;
    let nc: usize = tk.number()?;
    tk.number::<usize>()?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        if tk.number::<usize>()? != 3 {
            return Err(tk.error("only triangles are supported".into()));
        }
        cells.push([tk.number()?, tk.number()?, tk.number()?]);
    }
    tk.word("CELL_TYPES")?;
    tk.number::<usize>()?;
    let cell_types = (0..nc).map(|_| tk.number()).collect::<Result<Vec<u8>>>()?;
    tk.word("POINT_DATA")?;
    tk.number::<usize>()?;
    for w in ["SCALARS", "u", "double", "1", "LOOKUP_TABLE", "default"] {
        tk.word(w)?;
    }
    let values = (0..np).map(|_| tk.number()).collect::<Result<Vec<f64>>>()?;
    Ok(VtkData {
        points,
        cells,
        cell_types,
        values,
    })
}
