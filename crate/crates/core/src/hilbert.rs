//! Dense multi-factor states and operators addressed by site name.
//!
//! Operators are never materialized on the full space: each local factor is
//! applied in gather form over the untouched indices.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{kron, CMat, Monomial, ONE, ZERO};
use crate::{Error, Result, C64};

/// Default envelope for dense states (complex amplitudes).
pub const DEFAULT_ENVELOPE: u128 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub dim: usize,
}

/// Ordered tensor factors; row-major with the first site most significant.
#[derive(Clone, Debug)]
pub struct TensorFactorSpace {
    sites: Vec<Site>,
    strides: Vec<usize>,
    index: HashMap<String, usize>,
    total: usize,
}

impl PartialEq for TensorFactorSpace {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites
    }
}

impl TensorFactorSpace {
    pub fn new<S: Into<String>>(sites: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let sites: Vec<Site> = sites.into_iter().map(|(id, dim)| Site { id: id.into(), dim }).collect();
        let mut index = HashMap::new();
        for (i, s) in sites.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::Dimension(format!("site {} has dimension 0", s.id)));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::SiteMismatch(format!("duplicate site id {}", s.id)));
            }
        }
        let mut total: usize = 1;
        let mut strides = vec![0; sites.len()];
        for (i, s) in sites.iter().enumerate().rev() {
            strides[i] = total;
            total = total
                .checked_mul(s.dim)
                .ok_or(Error::Envelope { required: u128::MAX, limit: usize::MAX as u128 })?;
        }
        Ok(TensorFactorSpace { sites, strides, index, total })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::SiteMismatch(format!("no site {id}")))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn dim_of(&self, id: &str) -> Result<usize> {
        Ok(self.sites[self.position(id)?].dim)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.sites.len()];
        for (i, s) in self.sites.iter().enumerate().rev() {
            out[i] = flat % s.dim;
            flat /= s.dim;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    /// Flat offsets of every joint value of `positions`, row-major in the
    /// given order, all other sites at 0.
    fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let mut out = vec![0usize];
        for &p in positions {
            let (d, s) = (self.sites[p].dim, self.strides[p]);
            out = out.iter().flat_map(|&o| (0..d).map(move |v| o + v * s)).collect();
        }
        out
    }

    /// Joint index of `positions` inside flat index `k`.
    fn sub_index(&self, k: usize, positions: &[usize]) -> usize {
        positions.iter().fold(0, |acc, &p| acc * self.sites[p].dim + (k / self.strides[p]) % self.sites[p].dim)
    }
}

/// Matrix of a single local factor.
#[derive(Clone, Debug)]
pub enum LocalMatrix {
    Dense(CMat),
    Diagonal(Vec<C64>),
    Monomial(Monomial),
}

impl LocalMatrix {
    pub fn dim(&self) -> usize {
        match self {
            LocalMatrix::Dense(m) => m.nrows(),
            LocalMatrix::Diagonal(d) => d.len(),
            LocalMatrix::Monomial(m) => m.dim(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            LocalMatrix::Dense(m) => m.clone(),
            LocalMatrix::Diagonal(d) => CMat::from_diagonal(&nalgebra::DVector::from_vec(d.clone())),
            LocalMatrix::Monomial(m) => m.to_matrix(),
        }
    }

    pub fn adjoint(&self) -> LocalMatrix {
        match self {
            LocalMatrix::Dense(m) => LocalMatrix::Dense(m.adjoint()),
            LocalMatrix::Diagonal(d) => LocalMatrix::Diagonal(d.iter().map(|x| x.conj()).collect()),
            LocalMatrix::Monomial(m) => LocalMatrix::Monomial(m.adjoint()),
        }
    }

    /// `(row, value)` entries of column `j`.
    fn column(&self, j: usize) -> Vec<(usize, C64)> {
        match self {
            LocalMatrix::Dense(m) => (0..m.nrows()).filter(|&r| m[(r, j)] != ZERO).map(|r| (r, m[(r, j)])).collect(),
            LocalMatrix::Diagonal(d) => vec![(j, d[j])],
            LocalMatrix::Monomial(m) => vec![(m.target[j], m.phase[j])],
        }
    }
}

/// A matrix acting on an ordered list of sites (first site most significant).
#[derive(Clone, Debug)]
pub struct LocalFactor {
    pub sites: Vec<String>,
    pub matrix: LocalMatrix,
}

impl LocalFactor {
    pub fn new<S: Into<String>>(sites: impl IntoIterator<Item = S>, matrix: LocalMatrix) -> Self {
        LocalFactor { sites: sites.into_iter().map(Into::into).collect(), matrix }
    }

    pub fn single(site: &str, matrix: LocalMatrix) -> Self {
        LocalFactor::new([site], matrix)
    }

    fn positions(&self, space: &TensorFactorSpace) -> Result<Vec<usize>> {
        let pos = self.sites.iter().map(|s| space.position(s)).collect::<Result<Vec<_>>>()?;
        let d: usize = pos.iter().map(|&p| space.sites[p].dim).product();
        if d != self.matrix.dim() {
            return Err(Error::Dimension(format!("operator of dim {} on sites {:?} of joint dim {d}", self.matrix.dim(), self.sites)));
        }
        Ok(pos)
    }

    fn apply(&self, space: &TensorFactorSpace, input: &[C64]) -> Result<Vec<C64>> {
        let pos = self.positions(space)?;
        let off = space.offsets(&pos);
        let mut out = vec![ZERO; input.len()];
        match &self.matrix {
            LocalMatrix::Diagonal(d) => out.par_iter_mut().enumerate().for_each(|(k, o)| {
                *o = d[space.sub_index(k, &pos)] * input[k];
            }),
            LocalMatrix::Monomial(m) => {
                let inv = m.adjoint();
                out.par_iter_mut().enumerate().for_each(|(k, o)| {
                    let i = space.sub_index(k, &pos);
                    let j = inv.target[i];
                    *o = inv.phase[i].conj() * input[k - off[i] + off[j]];
                });
            }
            LocalMatrix::Dense(m) => out.par_iter_mut().enumerate().for_each(|(k, o)| {
                let i = space.sub_index(k, &pos);
                let base = k - off[i];
                *o = (0..off.len()).map(|j| m[(i, j)] * input[base + off[j]]).sum();
            }),
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
struct Term {
    coeff: C64,
    /// Matrix product `factors[0] · factors[1] ⋯`; the last acts first.
    factors: Vec<LocalFactor>,
}

/// A linear combination of products of local factors.
#[derive(Clone, Debug)]
pub struct SiteOperator {
    terms: Vec<Term>,
}

impl SiteOperator {
    pub fn identity() -> Self {
        SiteOperator { terms: vec![Term { coeff: ONE, factors: vec![] }] }
    }

    pub fn zero() -> Self {
        SiteOperator { terms: vec![] }
    }

    pub fn local(f: LocalFactor) -> Self {
        SiteOperator { terms: vec![Term { coeff: ONE, factors: vec![f] }] }
    }

    /// Tensor product of factors on pairwise disjoint sites.
    pub fn product(fs: Vec<LocalFactor>) -> Self {
        SiteOperator { terms: vec![Term { coeff: ONE, factors: fs }] }
    }

    pub fn sum(ops: impl IntoIterator<Item = SiteOperator>) -> Self {
        SiteOperator { terms: ops.into_iter().flat_map(|o| o.terms).collect() }
    }

    pub fn scale(mut self, c: C64) -> Self {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self
    }

    pub fn scale_re(self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn plus(mut self, other: SiteOperator) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn minus(self, other: SiteOperator) -> Self {
        self.plus(other.scale(-ONE))
    }

    /// `self · other` (other acts first).
    pub fn compose(&self, other: &SiteOperator) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term { coeff: a.coeff * b.coeff, factors });
            }
        }
        SiteOperator { terms }
    }

    pub fn adjoint(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff.conj(),
                factors: t.factors.iter().rev().map(|f| LocalFactor { sites: f.sites.clone(), matrix: f.matrix.adjoint() }).collect(),
            })
            .collect();
        SiteOperator { terms }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Union of all supported sites, in first-seen order.
    pub fn support(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.terms {
            for f in &t.factors {
                for s in &f.sites {
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, s: &DenseState) -> Result<DenseState> {
        let mut acc: Option<Vec<C64>> = None;
        for t in &self.terms {
            let mut v = s.amps.clone();
            for f in t.factors.iter().rev() {
                v = f.apply(&s.space, &v)?;
            }
            match &mut acc {
                None => {
                    if t.coeff != ONE {
                        v.par_iter_mut().for_each(|x| *x *= t.coeff);
                    }
                    acc = Some(v);
                }
                Some(a) => a.par_iter_mut().zip(v.par_iter()).for_each(|(x, y)| *x += t.coeff * y),
            }
        }
        Ok(DenseState { space: s.space.clone(), amps: acc.unwrap_or_else(|| vec![ZERO; s.amps.len()]) })
    }

    /// Column `j` of the operator restricted to `space`, as sparse entries.
    fn column(&self, space: &TensorFactorSpace, positions: &[Vec<Vec<usize>>], j: usize) -> HashMap<usize, C64> {
        let mut out: HashMap<usize, C64> = HashMap::new();
        for (t, pos_t) in self.terms.iter().zip(positions) {
            let mut v: HashMap<usize, C64> = HashMap::from([(j, t.coeff)]);
            for (f, pos) in t.factors.iter().zip(pos_t).rev() {
                let off = space.offsets(pos);
                let mut next: HashMap<usize, C64> = HashMap::new();
                for (&k, &val) in &v {
                    let i = space.sub_index(k, pos);
                    let base = k - off[i];
                    for (r, m) in f.matrix.column(i) {
                        *next.entry(base + off[r]).or_insert(ZERO) += m * val;
                    }
                }
                v = next;
            }
            for (k, val) in v {
                *out.entry(k).or_insert(ZERO) += val;
            }
        }
        out
    }

    /// The operator as a monomial on `space` when it is a single product of
    /// monomial and diagonal factors.
    fn monomial_on(&self, space: &TensorFactorSpace) -> Result<Option<Monomial>> {
        let [t] = self.terms.as_slice() else { return Ok(None) };
        if t.factors.iter().any(|f| matches!(f.matrix, LocalMatrix::Dense(_))) {
            return Ok(None);
        }
        let pos = t.factors.iter().map(|f| f.positions(space)).collect::<Result<Vec<_>>>()?;
        let offs: Vec<Vec<usize>> = pos.iter().map(|p| space.offsets(p)).collect();
        let (target, phase): (Vec<usize>, Vec<C64>) = (0..space.total_dim())
            .into_par_iter()
            .map(|j| {
                let (mut k, mut ph) = (j, t.coeff);
                for ((f, p), off) in t.factors.iter().zip(&pos).zip(&offs).rev() {
                    let i = space.sub_index(k, p);
                    match &f.matrix {
                        LocalMatrix::Diagonal(d) => ph *= d[i],
                        LocalMatrix::Monomial(m) => {
                            ph *= m.phase[i];
                            k = k - off[i] + off[m.target[i]];
                        }
                        LocalMatrix::Dense(_) => unreachable!(),
                    }
                }
                (k, ph)
            })
            .unzip();
        Ok(Some(Monomial { target, phase }))
    }

    fn positions_in(&self, space: &TensorFactorSpace) -> Result<Vec<Vec<Vec<usize>>>> {
        self.terms.iter().map(|t| t.factors.iter().map(|f| f.positions(space)).collect()).collect()
    }

    /// Dense matrix on the given ordered sites (small supports only).
    pub fn matrix_on(&self, space: &TensorFactorSpace) -> Result<CMat> {
        let pos = self.positions_in(space)?;
        let d = space.total_dim();
        let mut m = CMat::zeros(d, d);
        for j in 0..d {
            for (r, v) in self.column(space, &pos, j) {
                m[(r, j)] += v;
            }
        }
        Ok(m)
    }
}

/// Local space spanned by the union of two supports, with dims from `space`.
pub fn union_space(space: &TensorFactorSpace, a: &SiteOperator, b: &SiteOperator) -> Result<TensorFactorSpace> {
    let mut ids = a.support();
    for s in b.support() {
        if !ids.contains(&s) {
            ids.push(s);
        }
    }
    let dims = ids.iter().map(|s| space.dim_of(s)).collect::<Result<Vec<_>>>()?;
    TensorFactorSpace::new(ids.into_iter().zip(dims))
}

/// Largest entry of the difference of two one-entry columns.
fn column_gap(a: (usize, C64), b: (usize, C64)) -> f64 {
    if a.0 == b.0 {
        (a.1 - b.1).norm()
    } else {
        a.1.norm().max(b.1.norm())
    }
}

/// `max |([a, b])_{ij}|` on the union of the supports, computed column by
/// column. Disjoint supports commute exactly.
pub fn commutator_residual(space: &TensorFactorSpace, a: &SiteOperator, b: &SiteOperator) -> Result<f64> {
    let (sa, sb) = (a.support(), b.support());
    if sa.iter().all(|s| !sb.contains(s)) {
        return Ok(0.0);
    }
    let local = union_space(space, a, b)?;
    if let (Some(ma), Some(mb)) = (a.monomial_on(&local)?, b.monomial_on(&local)?) {
        return Ok((0..local.total_dim())
            .into_par_iter()
            .map(|j| {
                let (kb, pb) = (mb.target[j], mb.phase[j]);
                let (ka, pa) = (ma.target[j], ma.phase[j]);
                let ab = (ma.target[kb], ma.phase[kb] * pb);
                let ba = (mb.target[ka], mb.phase[ka] * pa);
                column_gap(ab, ba)
            })
            .reduce(|| 0.0, f64::max));
    }
    let ab = a.compose(b);
    let ba = b.compose(a);
    let diff = ab.minus(ba);
    let pos = diff.positions_in(&local)?;
    let worst = (0..local.total_dim())
        .into_par_iter()
        .map(|j| diff.column(&local, &pos, j).values().map(|v| v.norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// `max |(a − b)_{ij}|` on the union of supports.
pub fn operator_distance(space: &TensorFactorSpace, a: &SiteOperator, b: &SiteOperator) -> Result<f64> {
    let local = union_space(space, a, b)?;
    if let (Some(ma), Some(mb)) = (a.monomial_on(&local)?, b.monomial_on(&local)?) {
        return Ok((0..local.total_dim())
            .into_par_iter()
            .map(|j| column_gap((ma.target[j], ma.phase[j]), (mb.target[j], mb.phase[j])))
            .reduce(|| 0.0, f64::max));
    }
    let diff = a.clone().minus(b.clone());
    let pos = diff.positions_in(&local)?;
    Ok((0..local.total_dim())
        .into_par_iter()
        .map(|j| diff.column(&local, &pos, j).values().map(|v| v.norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max))
}

/// Dense complex amplitudes over a [`TensorFactorSpace`]; not necessarily
/// normalized.
#[derive(Clone, Debug)]
pub struct DenseState {
    space: Arc<TensorFactorSpace>,
    amps: Vec<C64>,
}

impl DenseState {
    pub fn zeros(space: TensorFactorSpace) -> Self {
        let n = space.total_dim();
        DenseState { space: Arc::new(space), amps: vec![ZERO; n] }
    }

    pub fn from_amplitudes(space: TensorFactorSpace, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::Dimension(format!("{} amplitudes for total dimension {}", amps.len(), space.total_dim())));
        }
        Ok(DenseState { space: Arc::new(space), amps })
    }

    pub fn basis(space: TensorFactorSpace, multi: &[usize]) -> Result<Self> {
        if multi.len() != space.len() || multi.iter().zip(space.sites()).any(|(m, s)| *m >= s.dim) {
            return Err(Error::Dimension(format!("basis label {multi:?} out of range")));
        }
        let k = space.flat_index(multi);
        let mut s = DenseState::zeros(space);
        s.amps[k] = ONE;
        Ok(s)
    }

    /// Kronecker product of per-site vectors in the listed order.
    pub fn embed_product<S: Into<String>>(states: impl IntoIterator<Item = (S, Vec<C64>)>) -> Result<Self> {
        let (ids, vecs): (Vec<String>, Vec<Vec<C64>>) = states.into_iter().map(|(s, v)| (s.into(), v)).unzip();
        let space = TensorFactorSpace::new(ids.into_iter().zip(vecs.iter().map(Vec::len)))?;
        let mut amps = vec![ONE];
        for v in &vecs {
            amps = amps.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        DenseState::from_amplitudes(space, amps)
    }

    pub fn space(&self) -> &TensorFactorSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn amplitude(&self, multi: &[usize]) -> C64 {
        self.amps[self.space.flat_index(multi)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.par_iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroState("normalization".into()));
        }
        self.amps.par_iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    pub fn scaled(mut self, c: C64) -> Self {
        self.amps.par_iter_mut().for_each(|a| *a *= c);
        self
    }

    /// `⟨self|other⟩`; sites must agree (other is reordered if needed).
    pub fn inner(&self, other: &DenseState) -> Result<C64> {
        let other = self.aligned(other)?;
        Ok(self.amps.par_iter().zip(other.amps.par_iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn distance(&self, other: &DenseState) -> Result<f64> {
        let other = self.aligned(other)?;
        Ok(self.amps.par_iter().zip(other.amps.par_iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    fn aligned(&self, other: &DenseState) -> Result<DenseState> {
        if *self.space == *other.space {
            return Ok(other.clone());
        }
        let order: Vec<&str> = self.space.sites().iter().map(|s| s.id.as_str()).collect();
        let r = other.reorder(&order)?;
        if *r.space != *self.space {
            return Err(Error::SiteMismatch("states live on different spaces".into()));
        }
        Ok(r)
    }

    pub fn fidelity_up_to_scale(&self, other: &DenseState) -> Result<f64> {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return Err(Error::ZeroState("fidelity of a zero vector".into()));
        }
        Ok((self.inner(other)?.norm() / (na * nb)).min(1.0))
    }

    /// Same state with sites permuted into `order` (must be a permutation).
    pub fn reorder(&self, order: &[&str]) -> Result<DenseState> {
        if order.len() != self.space.len() {
            return Err(Error::SiteMismatch(format!("reorder lists {} of {} sites", order.len(), self.space.len())));
        }
        let pos = order.iter().map(|s| self.space.position(s)).collect::<Result<Vec<_>>>()?;
        let new_space = TensorFactorSpace::new(pos.iter().map(|&p| (self.space.sites[p].id.clone(), self.space.sites[p].dim)))?;
        let src = &self.space;
        let amps: Vec<C64> = (0..self.amps.len())
            .into_par_iter()
            .map(|k| {
                let mut rem = k;
                let mut old = 0;
                for (i, &p) in pos.iter().enumerate().rev() {
                    let d = new_space.sites[i].dim;
                    old += (rem % d) * src.strides[p];
                    rem /= d;
                }
                self.amps[old]
            })
            .collect();
        DenseState::from_amplitudes(new_space, amps)
    }

    /// Renames sites through `rename`; unmapped ids are kept.
    pub fn relabel(&self, rename: impl Fn(&str) -> Option<String>) -> Result<DenseState> {
        let space = TensorFactorSpace::new(self.space.sites().iter().map(|s| (rename(&s.id).unwrap_or_else(|| s.id.clone()), s.dim)))?;
        DenseState::from_amplitudes(space, self.amps.clone())
    }

    /// `self ⊗ other`, other's sites appended.
    pub fn tensor(&self, other: &DenseState) -> Result<DenseState> {
        let space = TensorFactorSpace::new(self.space.sites().iter().chain(other.space.sites()).map(|s| (s.id.clone(), s.dim)))?;
        let n = other.amps.len();
        let amps: Vec<C64> = (0..self.amps.len() * n).into_par_iter().map(|k| self.amps[k / n] * other.amps[k % n]).collect();
        DenseState::from_amplitudes(space, amps)
    }

    /// Adds product-state factors for new sites and arranges all sites in
    /// `order`.
    pub fn grow_space<S: Into<String>>(&self, new_sites: impl IntoIterator<Item = (S, Vec<C64>)>, order: &[&str]) -> Result<DenseState> {
        self.tensor(&DenseState::embed_product(new_sites)?)?.reorder(order)
    }

    /// Contracts site `id` with `⟨v|` and removes it.
    pub fn project_out(&self, id: &str, v: &[C64]) -> Result<DenseState> {
        let p = self.space.position(id)?;
        let d = self.space.sites[p].dim;
        if v.len() != d {
            return Err(Error::Dimension(format!("projection vector of length {} on site {id} of dim {d}", v.len())));
        }
        let new_space = TensorFactorSpace::new(self.space.sites().iter().filter(|s| s.id != id).map(|s| (s.id.clone(), s.dim)))?;
        let stride = self.space.strides[p];
        let amps: Vec<C64> = (0..new_space.total_dim())
            .into_par_iter()
            .map(|k| {
                let (hi, lo) = (k / stride, k % stride);
                let base = hi * stride * d + lo;
                (0..d).map(|a| v[a].conj() * self.amps[base + a * stride]).sum()
            })
            .collect();
        DenseState::from_amplitudes(new_space, amps)
    }

    pub fn expectation(&self, op: &SiteOperator) -> Result<C64> {
        self.inner(&op.apply(self)?)
    }

    pub fn write_snapshot(&self, w: &mut impl Write) -> Result<()> {
        let header = serde_json::to_vec(&SnapshotHeader { sites: self.space.sites().to_vec() })?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.amps.len() * 16);
        for a in &self.amps {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot(r: &mut impl Read) -> Result<DenseState> {
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header: SnapshotHeader = serde_json::from_slice(&header)?;
        let space = TensorFactorSpace::new(header.sites.into_iter().map(|s| (s.id, s.dim)))?;
        let mut bytes = vec![0u8; space.total_dim() * 16];
        r.read_exact(&mut bytes)?;
        let amps = bytes
            .chunks_exact(16)
            .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
            .collect();
        DenseState::from_amplitudes(space, amps)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    sites: Vec<Site>,
}

/// Fails with [`Error::Envelope`] when `dims` multiply past `limit`.
pub fn check_envelope(dims: impl IntoIterator<Item = usize>, limit: u128) -> Result<u128> {
    let required = dims.into_iter().fold(1u128, |acc, d| acc.saturating_mul(d as u128));
    if required > limit {
        return Err(Error::Envelope { required, limit });
    }
    Ok(required)
}

/// Dense matrix of a product of local factors, for tests and small checks.
pub fn factors_kron(ms: &[CMat]) -> CMat {
    ms.iter().fold(CMat::identity(1, 1), |acc, m| kron(&acc, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::build_group;
    use proptest::prelude::*;

    fn z2_swap() -> LocalMatrix {
        LocalMatrix::Monomial(Monomial::permutation(vec![1, 0]))
    }

    #[test]
    fn swap_on_first_site() {
        let s = DenseState::embed_product([("a", vec![ONE, ZERO]), ("b", vec![ONE, ZERO])]).unwrap();
        let out = SiteOperator::local(LocalFactor::single("a", z2_swap())).apply(&s).unwrap();
        assert_eq!(out.amplitude(&[1, 0]), ONE);
        assert!((out.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_keeps_amplitudes() {
        let s = DenseState::embed_product([("a", vec![ONE, C64::new(0.0, 2.0)]), ("b", vec![ONE, -ONE])]).unwrap();
        let out = SiteOperator::identity().apply(&s).unwrap();
        assert_eq!(out.amplitudes(), s.amplitudes());
    }

    #[test]
    fn left_translation_permutes_z3_basis_state() {
        let g = build_group("Z3").unwrap();
        let space = TensorFactorSpace::new([("0", 3), ("1", 3), ("2", 3)]).unwrap();
        let s = DenseState::basis(space, &[0, 2, 1]).unwrap();
        let op = SiteOperator::local(LocalFactor::single("1", LocalMatrix::Monomial(g.left_mono(2))));
        let out = op.apply(&s).unwrap();
        // 2 + 2 = 1 mod 3.
        assert_eq!(out.amplitude(&[0, 1, 1]), ONE);
    }

    #[test]
    fn dense_and_monomial_paths_agree() {
        let g = build_group("S3").unwrap();
        let space = TensorFactorSpace::new([("x", 6), ("y", 2), ("z", 6)]).unwrap();
        let amps: Vec<C64> = (0..72).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let s = DenseState::from_amplitudes(space, amps).unwrap();
        let m = g.left_mono(3).kron(&g.right_mono(4));
        let a = SiteOperator::local(LocalFactor::new(["z", "x"], LocalMatrix::Monomial(m.clone()))).apply(&s).unwrap();
        let b = SiteOperator::local(LocalFactor::new(["z", "x"], LocalMatrix::Dense(m.to_matrix()))).apply(&s).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-13);
    }

    #[test]
    fn fidelity_examples() {
        let v = DenseState::embed_product([("a", vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)])]).unwrap();
        let w = v.clone().scaled(C64::new(0.0, 2.7));
        assert!((v.fidelity_up_to_scale(&w).unwrap() - 1.0).abs() < 1e-15);
        let e0 = DenseState::basis(TensorFactorSpace::new([("a", 2)]).unwrap(), &[0]).unwrap();
        let e1 = DenseState::basis(TensorFactorSpace::new([("a", 2)]).unwrap(), &[1]).unwrap();
        assert_eq!(e0.fidelity_up_to_scale(&e1).unwrap(), 0.0);
        let perturbed = DenseState::from_amplitudes(e0.space().clone(), vec![ONE, C64::new(1e-12, 0.0)]).unwrap();
        assert!(e0.fidelity_up_to_scale(&perturbed).unwrap() >= 1.0 - 1e-20);
        assert!(matches!(DenseState::zeros(e0.space().clone()).fidelity_up_to_scale(&e0), Err(Error::ZeroState(_))));
    }

    #[test]
    fn plus_plus_is_uniform() {
        let h = 0.5f64.sqrt();
        let s = DenseState::embed_product([("a", vec![C64::new(h, 0.0); 2]), ("b", vec![C64::new(h, 0.0); 2])]).unwrap();
        assert!(s.amplitudes().iter().all(|a| (a - C64::new(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn grow_space_interleaves_gauge_sites() {
        let s = DenseState::embed_product([("m0", vec![ZERO, ONE]), ("m1", vec![ONE, ZERO])]).unwrap();
        let g = s.grow_space([("g01", vec![ZERO, ONE]), ("g10", vec![ZERO, ONE])], &["m0", "g01", "m1", "g10"]).unwrap();
        let ids: Vec<&str> = g.space().sites().iter().map(|x| x.id.as_str()).collect();
        assert_eq!(ids, ["m0", "g01", "m1", "g10"]);
        // m0=1, g01=1, m1=0, g10=1 → 8 + 4 + 0 + 1.
        assert_eq!(g.amplitudes()[13], ONE);
        assert!((g.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn project_out_contracts_one_site() {
        let s = DenseState::embed_product([("a", vec![ONE, C64::new(2.0, 0.0)]), ("b", vec![C64::new(3.0, 0.0), C64::new(5.0, 0.0)])]).unwrap();
        let r = s.project_out("a", &[ZERO, ONE]).unwrap();
        assert_eq!(r.amplitudes(), &[C64::new(6.0, 0.0), C64::new(10.0, 0.0)]);
    }

    #[test]
    fn commutators() {
        let g = build_group("S3").unwrap();
        let space = TensorFactorSpace::new([("a", 6), ("b", 6)]).unwrap();
        let l = SiteOperator::local(LocalFactor::single("a", LocalMatrix::Monomial(g.left_mono(1))));
        let r = SiteOperator::local(LocalFactor::single("a", LocalMatrix::Monomial(g.right_mono(3))));
        let l2 = SiteOperator::local(LocalFactor::single("a", LocalMatrix::Monomial(g.left_mono(3))));
        let far = SiteOperator::local(LocalFactor::single("b", LocalMatrix::Monomial(g.left_mono(3))));
        assert_eq!(commutator_residual(&space, &l, &r).unwrap(), 0.0);
        assert_eq!(commutator_residual(&space, &l, &far).unwrap(), 0.0);
        assert!(commutator_residual(&space, &l, &l2).unwrap() > 0.5);
    }

    #[test]
    fn snapshot_round_trip() {
        let s = DenseState::embed_product([("m:0", vec![C64::new(0.1, -0.2), ONE]), ("g:0,1", vec![ONE, ZERO, C64::new(0.0, 3.0)])]).unwrap();
        let mut buf = Vec::new();
        s.write_snapshot(&mut buf).unwrap();
        let r = DenseState::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(r.space(), s.space());
        assert_eq!(r.amplitudes(), s.amplitudes());
    }

    #[test]
    fn envelope() {
        assert_eq!(check_envelope([6; 8], DEFAULT_ENVELOPE).unwrap(), 1_679_616);
        assert!(matches!(check_envelope([6; 9], DEFAULT_ENVELOPE), Err(Error::Envelope { .. })));
    }

    fn arb_dims() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..5, 1..6)
    }

    proptest! {
        #[test]
        fn multi_index_round_trip(dims in arb_dims(), seed in any::<u64>()) {
            let space = TensorFactorSpace::new(dims.iter().enumerate().map(|(i, &d)| (i.to_string(), d))).unwrap();
            let k = (seed as usize) % space.total_dim();
            prop_assert_eq!(space.flat_index(&space.multi_index(k)), k);
        }

        #[test]
        fn apply_is_linear(re in prop::collection::vec(-1.0f64..1.0, 24), im in prop::collection::vec(-1.0f64..1.0, 24), c in -2.0f64..2.0) {
            let space = TensorFactorSpace::new([("a", 2), ("b", 3), ("c", 4)]).unwrap();
            let x: Vec<C64> = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
            let y: Vec<C64> = im.iter().zip(&re).map(|(a, b)| C64::new(*a, -*b)).collect();
            let m = CMat::from_fn(8, 8, |i, j| C64::new((i * 3 + j) as f64 % 5.0, (i + 2 * j) as f64 % 3.0));
            let op = SiteOperator::local(LocalFactor::new(["c", "a"], LocalMatrix::Dense(m)));
            let sx = DenseState::from_amplitudes(space.clone(), x.clone()).unwrap();
            let sy = DenseState::from_amplitudes(space.clone(), y.clone()).unwrap();
            let comb: Vec<C64> = x.iter().zip(&y).map(|(a, b)| a + b * c).collect();
            let lhs = op.apply(&DenseState::from_amplitudes(space.clone(), comb).unwrap()).unwrap();
            let ax = op.apply(&sx).unwrap();
            let ay = op.apply(&sy).unwrap();
            let rhs: Vec<C64> = ax.amplitudes().iter().zip(ay.amplitudes()).map(|(a, b)| a + b * c).collect();
            let rhs = DenseState::from_amplitudes(space, rhs).unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() < 1e-10);
        }

        #[test]
        fn disjoint_supports_commute_exactly(g in 0usize..6, h in 0usize..6, seed in 0u64..1000) {
            let grp = build_group("S3").unwrap();
            let space = TensorFactorSpace::new([("a", 6), ("b", 6), ("c", 2)]).unwrap();
            let amps: Vec<C64> = (0..72).map(|k| C64::new(((k as u64 * 7 + seed) % 11) as f64, (k % 3) as f64)).collect();
            let s = DenseState::from_amplitudes(space, amps).unwrap();
            let a = SiteOperator::local(LocalFactor::single("a", LocalMatrix::Monomial(grp.left_mono(g))));
            let b = SiteOperator::local(LocalFactor::single("b", LocalMatrix::Dense(grp.right_mono(h).to_matrix().map(|x| x * C64::new(0.3, 0.4)))));
            let ab = a.apply(&b.apply(&s).unwrap()).unwrap();
            let ba = b.apply(&a.apply(&s).unwrap()).unwrap();
            prop_assert_eq!(ab.amplitudes(), ba.amplitudes());
        }
    }
}
