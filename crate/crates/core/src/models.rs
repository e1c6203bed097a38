//! Model Hamiltonians: open Hubbard chains, the two-level model and
//! restricted molecular integrals read from FCIDUMP files.
//!
//! Spinorbital packing is site-major with spin minor: spatial orbital (or
//! site) `i` counted from zero maps to `2i` for ↑ and `2i + 1` for ↓.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{OperatorProduct, OperatorSum, ONE};
use crate::error::{Error, Result};

/// Spinorbital index of spatial orbital `i` with spin `s` (0 = ↑, 1 = ↓).
#[inline]
pub fn spin_orbital(i: usize, s: usize) -> usize {
    2 * i + s
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HubbardSpec {
    pub sites: usize,
    pub hopping: f64,
    pub onsite: f64,
}

impl HubbardSpec {
    pub fn new(sites: usize, hopping: f64, onsite: f64) -> Result<Self> {
        if sites == 0 || 2 * sites > crate::algebra::MAX_ORBITALS {
            return Err(Error::InvalidConfig(format!("Hubbard chain needs 1..=32 sites, got {sites}")));
        }
        Ok(Self { sites, hopping, onsite })
    }

    pub fn n_orbitals(&self) -> usize {
        2 * self.sites
    }
}

/// `-J Σ (a†_{i+1,σ} a_{iσ} + h.c.) + U Σ n_{i↑} n_{i↓}` with open boundaries.
pub fn hubbard_chain(spec: &HubbardSpec) -> OperatorSum {
    let j = Complex64::new(-spec.hopping, 0.0);
    let u = Complex64::new(spec.onsite, 0.0);
    let mut terms = Vec::new();
    for i in 0..spec.sites.saturating_sub(1) {
        for s in 0..2 {
            let (a, b) = (spin_orbital(i, s), spin_orbital(i + 1, s));
            terms.push((OperatorProduct::excitation(b, a), j));
            terms.push((OperatorProduct::excitation(a, b), j));
        }
    }
    for i in 0..spec.sites {
        let (up, dn) = (spin_orbital(i, 0), spin_orbital(i, 1));
        terms.push((OperatorProduct::from_masks(1 << up | 1 << dn, 1 << up | 1 << dn), u));
    }
    OperatorSum::from_terms(terms)
}

/// `h_pp n_p + h_qq n_q + h_pq (a^p_q + a^q_p)`.
pub fn two_level(h_pp: f64, h_qq: f64, h_pq: f64, p: usize, q: usize) -> Result<OperatorSum> {
    if p == q {
        return Err(Error::InvalidConfig(format!("two-level model needs distinct orbitals, got p = q = {p}")));
    }
    let limit = crate::algebra::MAX_ORBITALS;
    if let Some(&index) = [p, q].iter().find(|&&i| i >= limit) {
        return Err(Error::IndexOutOfRange { index, limit });
    }
    let re = |x: f64| Complex64::new(x, 0.0);
    Ok(OperatorSum::from_terms([
        (OperatorProduct::number(p), re(h_pp)),
        (OperatorProduct::number(q), re(h_qq)),
        (OperatorProduct::excitation(p, q), re(h_pq)),
        (OperatorProduct::excitation(q, p), re(h_pq)),
    ]))
}

/// Restricted integrals over spatial orbitals, chemist notation `(pq|rs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularIntegrals {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub scalar: f64,
    one: Vec<f64>,
    two: Vec<f64>,
    /// Symmetry violations above [`SYMMETRY_WARN_TOL`] seen while reading.
    pub warnings: Vec<String>,
}

pub const SYMMETRY_WARN_TOL: f64 = 1e-8;

impl MolecularIntegrals {
    pub fn zeros(norb: usize, nelec: usize, ms2: i64) -> Self {
        Self {
            norb,
            nelec,
            ms2,
            scalar: 0.0,
            one: vec![0.0; norb * norb],
            two: vec![0.0; norb.pow(4)],
            warnings: Vec::new(),
        }
    }

    #[inline]
    fn idx2(&self, p: usize, q: usize) -> usize {
        p * self.norb + q
    }

    #[inline]
    fn idx4(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.norb + q) * self.norb + r) * self.norb + s
    }

    pub fn one(&self, p: usize, q: usize) -> f64 {
        self.one[self.idx2(p, q)]
    }

    pub fn two(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two[self.idx4(p, q, r, s)]
    }

    /// Sets `h_pq` and `h_qp`.
    pub fn set_one(&mut self, p: usize, q: usize, v: f64) {
        for (a, b) in [(p, q), (q, p)] {
            let k = self.idx2(a, b);
            self.one[k] = v;
        }
    }

    /// Sets `(pq|rs)` and its seven symmetry partners.
    pub fn set_two(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for (a, b, c, d) in eightfold(p, q, r, s) {
            let k = self.idx4(a, b, c, d);
            self.two[k] = v;
        }
    }

    /// Largest violation of the one- and two-electron permutational symmetries.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.norb;
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                worst = worst.max((self.one(p, q) - self.one(q, p)).abs());
                for r in 0..n {
                    for s in 0..n {
                        let v = self.two(p, q, r, s);
                        for (a, b, c, d) in eightfold(p, q, r, s) {
                            worst = worst.max((v - self.two(a, b, c, d)).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Spinorbital Hamiltonian
    /// `Σ h_pq a†_pσ a_qσ + ½ Σ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ + E_scalar`.
    pub fn hamiltonian(&self) -> Result<OperatorSum> {
        let n = self.norb;
        if 2 * n > crate::algebra::MAX_ORBITALS {
            return Err(Error::IndexOutOfRange { index: 2 * n, limit: crate::algebra::MAX_ORBITALS });
        }
        let mut terms = vec![(OperatorProduct::IDENTITY, Complex64::new(self.scalar, 0.0))];
        for p in 0..n {
            for q in 0..n {
                let h = self.one(p, q);
                if h != 0.0 {
                    for s in 0..2 {
                        terms.push((
                            OperatorProduct::excitation(spin_orbital(p, s), spin_orbital(q, s)),
                            Complex64::new(h, 0.0),
                        ));
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.two(p, q, r, s);
                        if v == 0.0 {
                            continue;
                        }
                        for sig in 0..2 {
                            for tau in 0..2 {
                                let cre = [spin_orbital(p, sig), spin_orbital(r, tau)];
                                let ann = [spin_orbital(q, sig), spin_orbital(s, tau)];
                                // a†_P a†_R a_S a_Q is the product a^{PR}_{QS}
                                if let Some((prod, sign)) = OperatorProduct::from_indices(&cre, &ann)? {
                                    terms.push((prod, Complex64::new(0.5 * v * sign, 0.0)));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(OperatorSum::from_terms(terms))
    }
}

fn eightfold(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

/// Random restricted integrals with the full permutational symmetry.
///
/// Orbital energies increase with the index and two-electron integrals are
/// dominated by Coulomb-like `(pp|qq)` entries, so the lowest determinant is
/// a reasonable reference.
pub fn synthetic_integrals(norb: usize, nelec: usize, seed: u64) -> MolecularIntegrals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ints = MolecularIntegrals::zeros(norb, nelec, 0);
    ints.scalar = rng.gen_range(0.2..1.0);
    for p in 0..norb {
        let eps = -1.2 + 0.7 * p as f64 + rng.gen_range(-0.1..0.1);
        ints.set_one(p, p, eps);
        for q in 0..p {
            ints.set_one(p, q, rng.gen_range(-0.15..0.15));
        }
    }
    for p in 0..norb {
        for q in 0..=p {
            for r in 0..norb {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let v = if p == q && r == s {
                        rng.gen_range(0.3..0.7)
                    } else {
                        rng.gen_range(-0.08..0.08)
                    };
                    ints.set_two(p, q, r, s, v);
                }
            }
        }
    }
    ints
}

struct Header {
    norb: usize,
    nelec: usize,
    ms2: i64,
}

fn parse_header(text: &str, path: &Path) -> Result<(Header, usize)> {
    let perr = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut body = String::new();
    let mut end_line = None;
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        let upper = t.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END") {
            body.push_str(&t[..pos]);
            end_line = Some(k + 1);
            break;
        }
        if t.ends_with('/') {
            body.push_str(t.trim_end_matches('/'));
            end_line = Some(k + 1);
            break;
        }
        body.push_str(t);
        body.push(' ');
    }
    let end_line = end_line.ok_or_else(|| perr(1, "missing namelist terminator (&END or /)".into()))?;
    let body = body.trim_start();
    let body = body
        .strip_prefix("&FCI")
        .or_else(|| body.strip_prefix("&fci"))
        .ok_or_else(|| perr(1, "header must start with &FCI".into()))?;

    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        match tok.split_once('=') {
            Some((k, v)) => {
                let mut vals = Vec::new();
                if !v.is_empty() {
                    vals.push(v.to_string());
                }
                fields.push((k.trim().to_ascii_uppercase(), vals));
            }
            None => match fields.last_mut() {
                Some(f) => f.1.push(tok.to_string()),
                None => return Err(perr(1, format!("unexpected token `{tok}` in header"))),
            },
        }
    }
    let get = |key: &str| -> Result<Option<i64>> {
        match fields.iter().find(|f| f.0 == key) {
            None => Ok(None),
            Some((_, v)) => {
                let s = v.first().ok_or_else(|| perr(1, format!("{key} has no value")))?;
                s.parse::<i64>().map(Some).map_err(|_| perr(1, format!("{key} = `{s}` is not an integer")))
            }
        }
    };
    let norb = get("NORB")?.ok_or_else(|| perr(1, "header lacks NORB".into()))?;
    let nelec = get("NELEC")?.unwrap_or(0);
    let ms2 = get("MS2")?.unwrap_or(0);
    if norb < 0 || nelec < 0 {
        return Err(perr(1, "NORB and NELEC must be non-negative".into()));
    }
    Ok((Header { norb: norb as usize, nelec: nelec as usize, ms2 }, end_line))
}

/// Parses FCIDUMP text. `path` is only used in diagnostics.
pub fn parse_fcidump(text: &str, path: &Path) -> Result<MolecularIntegrals> {
    let (hdr, skip) = parse_header(text, path)?;
    let perr = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut ints = MolecularIntegrals::zeros(hdr.norb, hdr.nelec, hdr.ms2);
    let mut seen2: Vec<Option<f64>> = vec![None; hdr.norb.pow(4)];
    for (k, line) in text.lines().enumerate().skip(skip) {
        let lineno = k + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(perr(lineno, format!("expected `value i j k l`, found {} fields", fields.len())));
        }
        // Fortran exponents
        let v: f64 = fields[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| perr(lineno, format!("bad value `{}`", fields[0])))?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| perr(lineno, format!("bad index `{f}`")))?;
            if *slot > hdr.norb {
                return Err(perr(lineno, format!("index {slot} exceeds NORB = {}", hdr.norb)));
            }
        }
        match idx {
            [0, 0, 0, 0] => ints.scalar = v,
            // orbital energies carry no Hamiltonian information
            [_, 0, 0, 0] => {}
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let (p, q) = (i - 1, j - 1);
                let old = ints.one(q, p);
                if old != 0.0 && (old - v).abs() > SYMMETRY_WARN_TOL {
                    ints.warnings.push(format!("line {lineno}: h({i},{j}) = {v} but h({j},{i}) = {old}"));
                }
                ints.set_one(p, q, v);
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (p, q, r, s) = (i - 1, j - 1, k - 1, l - 1);
                for (a, b, c, d) in eightfold(p, q, r, s) {
                    if let Some(old) = seen2[ints.idx4(a, b, c, d)] {
                        if (old - v).abs() > SYMMETRY_WARN_TOL {
                            ints.warnings.push(format!(
                                "line {lineno}: ({i}{j}|{k}{l}) = {v} conflicts with partner value {old}"
                            ));
                            break;
                        }
                    }
                }
                ints.set_two(p, q, r, s, v);
                seen2[ints.idx4(p, q, r, s)] = Some(v);
            }
            _ => return Err(perr(lineno, format!("unsupported index pattern {idx:?}"))),
        }
    }
    Ok(ints)
}

/// Reads an FCIDUMP file and assembles the spinorbital Hamiltonian.
pub fn load_fcidump(path: impl AsRef<Path>) -> Result<(MolecularIntegrals, OperatorSum)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let ints = parse_fcidump(&text, path)?;
    let h = ints.hamiltonian()?;
    let res = h.hermiticity_residual();
    if res > 1e-10 {
        return Err(Error::NonHermitianOperator(res));
    }
    Ok((ints, h))
}

/// FCIDUMP text for `ints` (unique entries only, 1-based indices).
pub fn write_fcidump(ints: &MolecularIntegrals) -> String {
    let n = ints.norb;
    let mut out = String::new();
    let _ = writeln!(out, " &FCI NORB={n},NELEC={},MS2={},", ints.nelec, ints.ms2);
    let _ = writeln!(out, "  ORBSYM={}", vec!["1"; n].join(","));
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let v = ints.two(p, q, r, s);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:>24.16e} {} {} {} {}", p + 1, q + 1, r + 1, s + 1);
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = ints.one(p, q);
            if v != 0.0 {
                let _ = writeln!(out, "{v:>24.16e} {} {} 0 0", p + 1, q + 1);
            }
        }
    }
    let _ = writeln!(out, "{:>24.16e} 0 0 0 0", ints.scalar);
    out
}

/// `n_p` as a sum, for observables.
pub fn number_operator(p: usize) -> OperatorSum {
    OperatorSum::from_product(OperatorProduct::number(p), ONE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{commutator, normal_order, ElementaryOperator as E};
    use crate::states::{build_dense, eigensolve_hermitian, ground_state, SectorBasis};

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn hubbard_small_cases() {
        let h1 = hubbard_chain(&HubbardSpec::new(1, 1.0, 2.5).unwrap());
        assert_eq!(h1, OperatorSum::from_terms([(OperatorProduct::new(&[0, 1], &[0, 1]).unwrap(), re(2.5))]));
        let h2 = hubbard_chain(&HubbardSpec::new(2, 1.0, 0.0).unwrap());
        assert_eq!(h2.len(), 4);
        assert!(h2.iter().all(|&(p, c)| c == re(-1.0) && p.len() == 2 && !p.is_number_product()));
        assert!(HubbardSpec::new(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn hubbard_conserves_spin_numbers() {
        let h = hubbard_chain(&HubbardSpec::new(4, 0.7, 1.3).unwrap());
        let n_up = OperatorSum::from_terms((0..4).map(|i| (OperatorProduct::number(2 * i), ONE)));
        let n_dn = OperatorSum::from_terms((0..4).map(|i| (OperatorProduct::number(2 * i + 1), ONE)));
        assert!(commutator(&h, &n_up).is_empty());
        assert!(commutator(&h, &n_dn).is_empty());
        assert!(h.hermiticity_residual() < 1e-15);
        let ranks: Vec<u32> = h.rank_partition().keys().map(|r| r.twice()).collect();
        assert_eq!(ranks, vec![2, 4]);
    }

    #[test]
    fn hubbard_dimer_ground_energy() {
        let h = hubbard_chain(&HubbardSpec::new(2, 1.0, 0.0).unwrap());
        let (e, _) = ground_state(&h, &SectorBasis::spin_sector(4, 1, 1)).unwrap();
        assert!((e + 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_level_terms() {
        let h = two_level(0.0, 0.0, 0.4, 1, 3).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(two_level(0.2, -0.3, 0.0, 1, 3).unwrap().len(), 2);
        assert!(two_level(1.0, 2.0, 0.5, 2, 2).is_err());
    }

    #[test]
    fn two_body_assembly_matches_normal_order() {
        let mut ints = MolecularIntegrals::zeros(2, 2, 0);
        ints.set_two(0, 1, 1, 0, 0.3);
        ints.set_two(0, 0, 1, 1, 0.5);
        let h = ints.hamiltonian().unwrap();
        let mut expect = OperatorSum::zero();
        for (p, q, r, s) in (0..16).map(|k| (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1)) {
            let v = ints.two(p, q, r, s);
            for sig in 0..2 {
                for tau in 0..2 {
                    let raw = [
                        E::cre(spin_orbital(p, sig)),
                        E::cre(spin_orbital(r, tau)),
                        E::ann(spin_orbital(s, tau)),
                        E::ann(spin_orbital(q, sig)),
                    ];
                    expect = &expect + &normal_order(&raw, re(0.5 * v)).unwrap();
                }
            }
        }
        assert!(h.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn single_orbital_fcidump() {
        let text = " &FCI NORB=1,NELEC=2,MS2=0,\n  ORBSYM=1,\n  ISYM=1,\n &END\n 0.7 1 1 1 1\n -1.5 1 1 0 0\n";
        let ints = parse_fcidump(text, Path::new("mem")).unwrap();
        let h = ints.hamiltonian().unwrap();
        let expect = OperatorSum::from_terms([
            (OperatorProduct::number(0), re(-1.5)),
            (OperatorProduct::number(1), re(-1.5)),
            (OperatorProduct::new(&[0, 1], &[0, 1]).unwrap(), re(0.7)),
        ]);
        assert!(h.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn scalar_only_fcidump() {
        let text = "&FCI NORB=2, NELEC=0 /\n  0.25D0 0 0 0 0\n";
        let h = parse_fcidump(text, Path::new("mem")).unwrap().hamiltonian().unwrap();
        assert_eq!(h, OperatorSum::scalar(re(0.25)));
    }

    #[test]
    fn fcidump_parse_errors_carry_line_numbers() {
        let text = "&FCI NORB=1 &END\n 0.5 1 1 1 1\n abc 1 1 0 0\n";
        match parse_fcidump(text, Path::new("x.fcidump")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "&FCI NORB=1 &END\n 0.5 1 2 0 0\n";
        assert!(matches!(parse_fcidump(text, Path::new("x")), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_fcidump("NORB=1\n", Path::new("x")), Err(Error::Parse { .. })));
    }

    #[test]
    fn fcidump_symmetry_warning() {
        let text = "&FCI NORB=2 &END\n 0.5 1 2 1 2\n 0.6 2 1 1 2\n";
        let ints = parse_fcidump(text, Path::new("x")).unwrap();
        assert_eq!(ints.warnings.len(), 1);
    }

    #[test]
    fn fcidump_round_trip_and_oracle() {
        let ints = synthetic_integrals(2, 2, 11);
        assert!(ints.symmetry_residual() < 1e-15);
        let back = parse_fcidump(&write_fcidump(&ints), Path::new("mem")).unwrap();
        assert!(back.warnings.is_empty());
        let h = ints.hamiltonian().unwrap();
        let h2 = back.hamiltonian().unwrap();
        assert!(h.max_abs_diff(&h2) < 1e-14);
        assert!(h.hermiticity_residual() < 1e-14);
        // full Fock diagonalization agrees with the sector minimum
        let full = eigensolve_hermitian(&build_dense(&h, &SectorBasis::full(4)).unwrap()).unwrap();
        let sectors: f64 = (0..=2)
            .flat_map(|u| (0..=2).map(move |d| (u, d)))
            .map(|(u, d)| ground_state(&h, &SectorBasis::spin_sector(4, u, d)).unwrap().0)
            .fold(f64::INFINITY, f64::min);
        assert!((full.values[0] - sectors).abs() < 1e-10);
    }
}
