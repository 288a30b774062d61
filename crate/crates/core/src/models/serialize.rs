//! Plain-text model files. Each line is a key followed by space-separated
//! values; floats are written in shortest round-trip form so a reloaded
//! model scores bit-identically.

use std::fmt::Display;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;

use super::forest::{ForestParams, RandomForest, Tree};
use super::gee::GeeModel;
use super::logistic::LogisticModel;
use super::svm::{SvmModel, SvmParams};
use super::univariate::UnivariateModel;
use super::{FittedParams, Hyper, ModelFamily, TrainedModel};
use crate::domain::OutcomeKey;
use crate::error::{Error, Result};
use crate::preprocess::{PcaProjection, Preprocessor, Protocol, Standardizer};

pub const MODEL_FILE_MAGIC: &str = "loadwatch-model v1";

/// A trained model with the transform its inputs need.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub outcome: OutcomeKey,
    pub protocol: Protocol,
    /// Names of the untransformed input columns.
    pub inputs: Vec<String>,
    pub preprocessor: Preprocessor,
    pub model: TrainedModel,
}

impl ModelFile {
    /// Score imputed, untransformed rows.
    pub fn score(&self, raw: &Array2<f64>) -> Result<Vec<f64>> {
        if raw.ncols() != self.inputs.len() {
            return Err(Error::InvalidInput(format!(
                "model file expects {} input columns, got {}",
                self.inputs.len(),
                raw.ncols()
            )));
        }
        self.model.score(&self.preprocessor.transform(raw))
    }
}

struct Out<W: Write> {
    w: W,
}

impl<W: Write> Out<W> {
    fn line<T: Display>(&mut self, key: &str, values: impl IntoIterator<Item = T>) -> std::io::Result<()> {
        write!(self.w, "{key}")?;
        for v in values {
            write!(self.w, " {v}")?;
        }
        writeln!(self.w)
    }

    fn one<T: Display>(&mut self, key: &str, v: T) -> std::io::Result<()> {
        self.line(key, [v])
    }

    fn floats(&mut self, key: &str, v: &[f64]) -> std::io::Result<()> {
        self.line(key, v.iter().map(|x| format!("{x:?}")))
    }

    fn matrix(&mut self, key: &str, m: &Array2<f64>) -> std::io::Result<()> {
        self.line(key, [m.nrows(), m.ncols()])?;
        for row in m.rows() {
            self.line("row", row.iter().map(|x| format!("{x:?}")))?;
        }
        Ok(())
    }
}

fn write_params<W: Write>(o: &mut Out<W>, params: &FittedParams) -> std::io::Result<()> {
    match params {
        FittedParams::ElasticNet(m) => {
            o.one("intercept", format!("{:?}", m.intercept))?;
            o.floats("coef", &m.coef)
        }
        FittedParams::Univariate(m) => {
            o.one("column", m.column)?;
            o.floats("intercept", &[m.intercept])?;
            o.floats("slope", &[m.slope])?;
            o.one("converged", m.converged)
        }
        FittedParams::Gee(m) => {
            o.floats("intercept", &[m.intercept])?;
            o.floats("coef", &m.coef)?;
            o.floats("alpha", &[m.alpha])?;
            o.floats("phi", &[m.phi])?;
            o.one("iterations", m.iterations)
        }
        FittedParams::Forest(f) => {
            o.one("trees", f.trees.len())?;
            for t in &f.trees {
                o.one("tree", t.feature.len())?;
                o.line("feature", &t.feature)?;
                o.floats("threshold", &t.threshold)?;
                o.line("left", &t.left)?;
                o.line("right", &t.right)?;
                o.floats("value", &t.value)?;
            }
            Ok(())
        }
        FittedParams::Svm(m) => {
            o.floats("gamma", &[m.gamma])?;
            o.floats("rho", &[m.rho])?;
            o.one("iterations", m.iterations)?;
            o.matrix("support", &m.support)?;
            o.floats("dual_coef", &m.dual_coef)
        }
    }
}

pub fn write_model_file<W: Write>(file: &ModelFile, w: W) -> Result<()> {
    let io = |e| Error::io("model file", e);
    let mut o = Out { w };
    let m = &file.model;
    (|| -> std::io::Result<()> {
        writeln!(o.w, "{MODEL_FILE_MAGIC}")?;
        o.one("outcome", file.outcome)?;
        o.one("protocol", file.protocol)?;
        o.one("family", m.family)?;
        o.one("hyper", m.hyper)?;
        o.one("seed", m.seed)?;
        o.one("inputs", file.inputs.len())?;
        for c in &file.inputs {
            o.one("input", c)?;
        }
        o.one("columns", m.columns.len())?;
        for c in &m.columns {
            o.one("column", c)?;
        }
        match &file.preprocessor {
            Preprocessor::Standardize(s) => {
                o.one("preprocessor", "standardize")?;
                o.floats("means", &s.means)?;
                o.floats("scales", &s.scales)?;
            }
            Preprocessor::Pca(p) => {
                o.one("preprocessor", "pca")?;
                o.floats("means", &p.means)?;
                o.floats("scales", &p.scales)?;
                o.floats("explained", &p.explained)?;
                o.matrix("loadings", &p.loadings)?;
            }
        }
        write_params(&mut o, &m.params)?;
        writeln!(o.w, "end")?;
        o.w.flush()
    })()
    .map_err(io)
}

struct In<R: BufRead> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> In<R> {
    fn err(&self, msg: impl Display) -> Error {
        Error::ModelFile(format!("line {}: {msg}", self.line_no))
    }

    fn raw(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::io("model file", e)),
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// The remainder of the next line, which must start with `key`.
    fn rest(&mut self, key: &str) -> Result<String> {
        let line = self.raw()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            None if line == key => Ok(String::new()),
            _ => Err(self.err(format!("expected `{key}`, found `{line}`"))),
        }
    }

    fn many<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let rest = self.rest(key)?;
        rest.split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| self.err(format!("bad value `{t}` for `{key}`"))))
            .collect()
    }

    fn one<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.many::<T>(key)?;
        match <[T; 1]>::try_from(v) {
            Ok([x]) => Ok(x),
            Err(_) => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn sized<T: FromStr>(&mut self, key: &str, n: usize) -> Result<Vec<T>> {
        let v = self.many(key)?;
        if v.len() != n {
            return Err(self.err(format!("`{key}` has {} values, expected {n}", v.len())));
        }
        Ok(v)
    }

    fn matrix(&mut self, key: &str) -> Result<Array2<f64>> {
        let dims: Vec<usize> = self.sized(key, 2)?;
        let mut data = Vec::with_capacity(dims[0] * dims[1]);
        for _ in 0..dims[0] {
            data.extend(self.sized::<f64>("row", dims[1])?);
        }
        Array2::from_shape_vec((dims[0], dims[1]), data).map_err(|e| self.err(e))
    }

    fn names(&mut self, count_key: &str, key: &str) -> Result<Vec<String>> {
        let n: usize = self.one(count_key)?;
        (0..n).map(|_| self.rest(key)).collect()
    }
}

fn parse_hyper(family: ModelFamily, s: &str) -> Option<Hyper> {
    let kv: Vec<(&str, &str)> = s.split(';').filter_map(|p| p.split_once('=')).collect();
    let get = |k: &str| kv.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
    Some(match family {
        ModelFamily::ElasticNet => Hyper::ElasticNet {
            lambda: get("lambda")?.parse().ok()?,
            alpha: get("alpha")?.parse().ok()?,
        },
        ModelFamily::Univariate => Hyper::Univariate {
            column: get("column")?.parse().ok()?,
        },
        ModelFamily::Gee => (s == "ar1").then_some(Hyper::Gee)?,
        ModelFamily::RandomForest => Hyper::Forest(ForestParams {
            trees: get("trees")?.parse().ok()?,
            mtry: get("mtry")?.parse().ok()?,
            min_leaf: get("min_leaf")?.parse().ok()?,
        }),
        ModelFamily::Svm => Hyper::Svm(SvmParams {
            cost: get("cost")?.parse().ok()?,
            gamma: get("gamma")?.parse().ok()?,
        }),
    })
}

fn read_params<R: BufRead>(r: &mut In<R>, family: ModelFamily, p: usize) -> Result<FittedParams> {
    Ok(match family {
        ModelFamily::ElasticNet => FittedParams::ElasticNet(LogisticModel {
            intercept: r.one("intercept")?,
            coef: r.sized("coef", p)?,
        }),
        ModelFamily::Univariate => {
            let column: usize = r.one("column")?;
            if column >= p {
                return Err(r.err("univariate column out of range"));
            }
            FittedParams::Univariate(UnivariateModel {
                column,
                intercept: r.one("intercept")?,
                slope: r.one("slope")?,
                converged: r.one("converged")?,
            })
        }
        ModelFamily::Gee => FittedParams::Gee(GeeModel {
            intercept: r.one("intercept")?,
            coef: r.sized("coef", p)?,
            alpha: r.one("alpha")?,
            phi: r.one("phi")?,
            iterations: r.one("iterations")?,
        }),
        ModelFamily::RandomForest => {
            let n: usize = r.one("trees")?;
            let mut trees = Vec::with_capacity(n);
            for _ in 0..n {
                let nodes: usize = r.one("tree")?;
                let t = Tree {
                    feature: r.sized("feature", nodes)?,
                    threshold: r.sized("threshold", nodes)?,
                    left: r.sized("left", nodes)?,
                    right: r.sized("right", nodes)?,
                    value: r.sized("value", nodes)?,
                };
                let bad_child = |c: u32| c as usize >= nodes;
                let bad = t.feature.iter().enumerate().any(|(i, &f)| {
                    f >= p as i32 || (f >= 0 && (bad_child(t.left[i]) || bad_child(t.right[i])))
                });
                if nodes == 0 || bad {
                    return Err(r.err("malformed tree"));
                }
                trees.push(t);
            }
            FittedParams::Forest(RandomForest {
                trees,
                oob_scores: Vec::new(),
            })
        }
        ModelFamily::Svm => {
            let gamma = r.one("gamma")?;
            let rho = r.one("rho")?;
            let iterations = r.one("iterations")?;
            let support = r.matrix("support")?;
            if support.ncols() != p {
                return Err(r.err("support vectors have the wrong width"));
            }
            FittedParams::Svm(SvmModel {
                gamma,
                support: support.clone(),
                dual_coef: r.sized("dual_coef", support.nrows())?,
                rho,
                iterations,
            })
        }
    })
}

pub fn read_model_file<R: BufRead>(reader: R) -> Result<ModelFile> {
    let mut r = In {
        lines: reader.lines(),
        line_no: 0,
    };
    if r.raw()? != MODEL_FILE_MAGIC {
        return Err(r.err(format!("not a model file (expected `{MODEL_FILE_MAGIC}` header)")));
    }
    let outcome: OutcomeKey = r.rest("outcome")?.parse().map_err(|e: String| r.err(e))?;
    let protocol: Protocol = r.rest("protocol")?.parse()?;
    let family: ModelFamily = r.rest("family")?.parse()?;
    let hyper_text = r.rest("hyper")?;
    let hyper = parse_hyper(family, &hyper_text).ok_or_else(|| r.err(format!("bad hyperparameters `{hyper_text}`")))?;
    let seed: u64 = r.one("seed")?;
    let inputs = r.names("inputs", "input")?;
    let columns = r.names("columns", "column")?;
    let q = inputs.len();
    let preprocessor = match r.rest("preprocessor")?.as_str() {
        "standardize" => Preprocessor::Standardize(Standardizer {
            means: r.sized("means", q)?,
            scales: r.sized("scales", q)?,
        }),
        "pca" => {
            let means = r.sized("means", q)?;
            let scales = r.sized("scales", q)?;
            let explained = r.many("explained")?;
            let loadings = r.matrix("loadings")?;
            if loadings.nrows() != q {
                return Err(r.err("loadings have the wrong height"));
            }
            Preprocessor::Pca(PcaProjection {
                means,
                scales,
                n_components: loadings.ncols(),
                loadings,
                explained,
            })
        }
        other => return Err(r.err(format!("unknown preprocessor `{other}`"))),
    };
    let width = match &preprocessor {
        Preprocessor::Standardize(_) => q,
        Preprocessor::Pca(p) => p.n_components,
    };
    if columns.len() != width {
        return Err(r.err(format!("{} model columns but the transform yields {width}", columns.len())));
    }
    let params = read_params(&mut r, family, width)?;
    r.rest("end")?;
    Ok(ModelFile {
        outcome,
        protocol,
        inputs,
        preprocessor,
        model: TrainedModel {
            family,
            columns,
            hyper,
            params,
            seed,
            cv: None,
        },
    })
}
