//! Python bindings for the `uwbtr` simulator.
//!
//! Channels, training sequences and system parameters are plain classes;
//! sweeps return lists of dicts so results drop straight into pandas.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uwbtr_rs::channel::{self, ChannelModel};
use uwbtr_rs::estimation::{self, TrainingSequence};
use uwbtr_rs::montecarlo::{self, BerExperiment, CsiSource};
use uwbtr_rs::mutual_info::{self, InterferenceMode, LoadParams, MiOptions};
use uwbtr_rs::signal::{self, Placement, SpreadingVector, SystemConfig};
use uwbtr_rs::transceiver::{self, UserLink};
use uwbtr_rs::{cli, rng, Error, Scheme};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::GridTooNarrow { .. } | Error::PdfRipple(_) | Error::TrainingRankDeficient(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(to_py)
}

/// Scalar system parameters.
#[pyclass(name = "System", from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: SystemConfig,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (chips, users, channel_chips, iota=1, bandwidth_hz=1e9, symbol_energy=1.0,
                        noise_var=0.0, csi_error_var=0.0, placement="circular"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        chips: usize,
        users: usize,
        channel_chips: usize,
        iota: usize,
        bandwidth_hz: f64,
        symbol_energy: f64,
        noise_var: f64,
        csi_error_var: f64,
        placement: &str,
    ) -> PyResult<Self> {
        let placement = match placement {
            "circular" => Placement::Circular,
            "linear" => Placement::Linear,
            other => return Err(PyValueError::new_err(format!("unknown placement `{other}`"))),
        };
        let inner = SystemConfig {
            chips_per_symbol: chips,
            users,
            iota,
            bandwidth_hz,
            channel_chips,
            symbol_energy,
            noise_var,
            csi_error_var,
            placement,
        };
        inner.validate().map_err(to_py)?;
        Ok(PySystem { inner })
    }

    #[getter]
    fn chips(&self) -> usize {
        self.inner.chips_per_symbol
    }

    #[getter]
    fn users(&self) -> usize {
        self.inner.users
    }

    #[getter]
    fn iota(&self) -> usize {
        self.inner.iota
    }

    #[getter]
    fn channel_chips(&self) -> usize {
        self.inner.channel_chips
    }

    #[getter]
    fn tap_count(&self) -> usize {
        self.inner.tap_count()
    }

    #[getter]
    fn frame_samples(&self) -> usize {
        self.inner.frame_samples()
    }

    /// `(K - 1) / N`.
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.load()
    }

    /// Copy with a different noise variance.
    fn with_noise_var(&self, noise_var: f64) -> Self {
        let mut inner = self.inner.clone();
        inner.noise_var = noise_var;
        PySystem { inner }
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "System(chips={}, users={}, channel_chips={}, iota={}, noise_var={})",
            s.chips_per_symbol, s.users, s.channel_chips, s.iota, s.noise_var
        )
    }
}

/// Source of unit-energy channel realizations.
#[pyclass(name = "Channel", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelModel,
}

#[pymethods]
impl PyChannel {
    /// Residential line-of-sight cluster/ray model.
    #[staticmethod]
    #[pyo3(signature = (bandwidth_hz=1e9, delay_spread_ns=50.0, iota=1))]
    fn cm1(bandwidth_hz: f64, delay_spread_ns: f64, iota: usize) -> PyResult<Self> {
        let inner = ChannelModel::cm1(bandwidth_hz, delay_spread_ns * 1e-9, iota);
        inner.validate().map_err(to_py)?;
        Ok(PyChannel { inner })
    }

    /// Single unit tap.
    #[staticmethod]
    fn delta() -> Self {
        PyChannel {
            inner: ChannelModel::delta(),
        }
    }

    /// Independent Gaussian taps with power `exp(-l / decay_taps)`.
    #[staticmethod]
    fn exponential(taps: usize, decay_taps: f64) -> PyResult<Self> {
        let inner = ChannelModel::ExponentialGaussian { taps, decay_taps };
        inner.validate().map_err(to_py)?;
        Ok(PyChannel { inner })
    }

    /// Always returns `taps` after unit-energy normalization.
    #[staticmethod]
    fn fixed(taps: Vec<f64>) -> PyResult<Self> {
        let d = channel::DiscreteChannel::from_taps(taps).map_err(to_py)?;
        let inner = ChannelModel::Fixed(channel::normalize_energy(&d).map_err(to_py)?);
        Ok(PyChannel { inner })
    }

    #[getter]
    fn tap_count(&self) -> usize {
        self.inner.tap_count()
    }

    /// One realization, deterministic in `seed`.
    fn draw(&self, seed: u64) -> PyResult<Vec<f64>> {
        let mut r = rng::seeded(seed);
        Ok(self.inner.draw(&mut r).map_err(to_py)?.into_taps())
    }

    /// `count` realizations from one stream.
    fn draw_many(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let mut r = rng::seeded(seed);
        (0..count)
            .map(|_| self.inner.draw(&mut r).map(|c| c.into_taps()))
            .collect::<Result<_, _>>()
            .map_err(to_py)
    }
}

/// Antipodal training sequence.
#[pyclass(name = "Training", from_py_object)]
#[derive(Clone)]
struct PyTraining {
    inner: TrainingSequence,
}

#[pymethods]
impl PyTraining {
    #[new]
    #[pyo3(signature = (signs, amplitude=1.0))]
    fn new(signs: Vec<i8>, amplitude: f64) -> PyResult<Self> {
        Ok(PyTraining {
            inner: TrainingSequence::new(signs, amplitude).map_err(to_py)?,
        })
    }

    #[getter]
    fn symbols(&self) -> Vec<f64> {
        self.inner.symbols()
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.inner.amplitude()
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn periodic_acf(&self) -> Vec<f64> {
        self.inner.periodic_acf()
    }

    fn cyclic_shift(&self, shift: usize) -> Self {
        PyTraining {
            inner: self.inner.cyclic_shift(shift),
        }
    }
}

/// Maximal-length sequence from an `m`-stage register.
#[pyfunction]
#[pyo3(signature = (m, seed_state=1, amplitude=1.0))]
fn gen_mseq(m: u32, seed_state: u32, amplitude: f64) -> PyResult<PyTraining> {
    let inner = estimation::gen_mseq(m, seed_state)
        .and_then(|t| t.with_amplitude(amplitude))
        .map_err(to_py)?;
    Ok(PyTraining { inner })
}

#[pyfunction]
fn autocorrelation(taps: Vec<f64>) -> Vec<f64> {
    channel::autocorrelation(&taps)
}

#[pyfunction]
fn perturb_channel(taps: Vec<f64>, error_var: f64, seed: u64) -> PyResult<Vec<f64>> {
    let c = channel::DiscreteChannel::from_taps(taps).map_err(to_py)?;
    Ok(signal::perturb_channel(&c, error_var, seed).map_err(to_py)?.into_taps())
}

/// Unit-energy time-reversed estimate.
#[pyfunction]
fn tr_prefilter(estimate: Vec<f64>) -> PyResult<Vec<f64>> {
    signal::tr_prefilter(&estimate).map_err(to_py)
}

/// Self and cross couplings seen by user `k`. `codes` holds one
/// `(hop, offset)` pair per user.
#[pyfunction]
fn couplings<'py>(
    py: Python<'py>,
    scheme_name: &str,
    system: &PySystem,
    channels: Vec<Vec<f64>>,
    estimates: Vec<Vec<f64>>,
    codes: Vec<(usize, usize)>,
    k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &system.inner;
    if channels.len() != estimates.len() || channels.len() != codes.len() {
        return Err(PyValueError::new_err("channels, estimates and codes differ in length"));
    }
    let users = channels
        .into_iter()
        .zip(estimates)
        .zip(codes)
        .map(|((channel, estimate), (hop, offset))| {
            let code = SpreadingVector::new(hop, offset, cfg.chips_per_symbol, cfg.iota)?;
            Ok(UserLink {
                channel,
                estimate,
                code,
            })
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(to_py)?;
    let s = transceiver::couplings(scheme(scheme_name)?, &users, k, cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("self", s.a_self)?;
    d.set_item("cross", s.a_cross)?;
    Ok(d)
}

/// Noisy downlink training observation.
#[pyfunction]
fn receive_dl_training(training: &PyTraining, channel: Vec<f64>, system: &PySystem, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    estimation::receive_dl_training(&training.inner, &channel, &system.inner, &mut r)
}

/// Matched-filter channel estimate and its per-tap error variance.
#[pyfunction]
fn dl_estimate(received: Vec<f64>, training: &PyTraining, system: &PySystem) -> PyResult<(Vec<f64>, f64)> {
    let e = estimation::dl_estimate(&received, &training.inner, &system.inner).map_err(to_py)?;
    Ok((e.channel, e.error_var))
}

fn csi_source(csi_error_var: f64, training_energy: Option<f64>) -> CsiSource {
    match training_energy {
        Some(energy) => CsiSource::TrainingDerived { energy },
        None => CsiSource::from_var(csi_error_var),
    }
}

/// Error-probability sweep. With `training_energy` the CSI error variance is
/// `noise_var / training_energy` at each SNR and `csi_error_var` is ignored.
#[pyfunction]
#[pyo3(signature = (system, channel, snr_db, trials, scheme_name, seed, csi_error_var=0.0,
                    training_energy=None, early_stop=true, normalize_prefilter=true))]
#[allow(clippy::too_many_arguments)]
fn run_ber<'py>(
    py: Python<'py>,
    system: &PySystem,
    channel: &PyChannel,
    snr_db: Vec<f64>,
    trials: u64,
    scheme_name: &str,
    seed: u64,
    csi_error_var: f64,
    training_energy: Option<f64>,
    early_stop: bool,
    normalize_prefilter: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut exp = BerExperiment::new(
        system.inner.clone(),
        channel.inner.clone(),
        snr_db,
        trials,
        scheme(scheme_name)?,
        seed,
    );
    exp.csi = csi_source(csi_error_var, training_energy);
    exp.early_stop = early_stop;
    exp.normalize_prefilter = normalize_prefilter;
    let res = py.detach(|| montecarlo::run_ber(&exp)).map_err(to_py)?;
    res.points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("scheme", res.scheme.name())?;
            d.set_item("beta", res.beta)?;
            d.set_item("snr_db", p.snr_db)?;
            d.set_item("sigma_xi2", p.sigma_xi2)?;
            d.set_item("pe", p.pe)?;
            d.set_item("stderr", p.stderr)?;
            d.set_item("errors", p.errors)?;
            d.set_item("trials", p.trials)?;
            Ok(d)
        })
        .collect()
}

/// Single-user TR/AR comparison; returns `(passed, points)`.
#[pyfunction]
#[pyo3(signature = (system, channel, snr_db, trials, seed, csi_error_var=0.0, alpha=0.01))]
#[allow(clippy::too_many_arguments)]
fn equivalence_test<'py>(
    py: Python<'py>,
    system: &PySystem,
    channel: &PyChannel,
    snr_db: Vec<f64>,
    trials: u64,
    seed: u64,
    csi_error_var: f64,
    alpha: f64,
) -> PyResult<(bool, Vec<Bound<'py, PyDict>>)> {
    let mut exp = BerExperiment::new(
        system.inner.clone(),
        channel.inner.clone(),
        snr_db,
        trials,
        Scheme::Tr,
        seed,
    );
    exp.csi = CsiSource::from_var(csi_error_var);
    exp.early_stop = false;
    let rep = py.detach(|| montecarlo::equivalence_test(&exp, alpha)).map_err(to_py)?;
    let points = rep
        .points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("snr_db", p.snr_db)?;
            d.set_item("pe_tr", p.pe_tr)?;
            d.set_item("pe_ar", p.pe_ar)?;
            d.set_item("stderr", p.stderr_combined)?;
            d.set_item("ks_p", p.ks.p_value)?;
            d.set_item("pe_consistent", p.pe_consistent)?;
            d.set_item("ks_consistent", p.ks_consistent)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((rep.passed(), points))
}

/// Empirical coupling samples and summary statistics.
#[pyfunction]
fn coupling_histogram<'py>(
    py: Python<'py>,
    system: &PySystem,
    channel: &PyChannel,
    scheme_name: &str,
    csi_error_var: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme = scheme(scheme_name)?;
    let s = py
        .detach(|| montecarlo::coupling_histogram(&system.inner, &channel.inner, scheme, csi_error_var, samples, seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("zero_mass", s.zero_mass)?;
    d.set_item("zero_mass_stderr", s.zero_mass_stderr)?;
    d.set_item("exact_zero_fraction", s.exact_zero_fraction)?;
    d.set_item("cross_variance", s.cross_moments.variance)?;
    d.set_item("cross_kurtosis", s.cross_moments.kurtosis)?;
    d.set_item("self_mean", s.self_moments.mean)?;
    d.set_item("self_variance", s.self_moments.variance)?;
    d.set_item("cross", s.cross)?;
    d.set_item("self", s.self_coupling)?;
    Ok(d)
}

/// Mutual information of the binary-input link from coupling samples.
/// Pass `users` and `chips` for the finite-K interference law.
#[pyfunction]
#[pyo3(signature = (self_samples, cross_samples, energy, noise_var, beta, channel_chips, iota=1,
                    users=None, chips=None, points=None))]
#[allow(clippy::too_many_arguments)]
fn mutual_information<'py>(
    py: Python<'py>,
    self_samples: Vec<f64>,
    cross_samples: Vec<f64>,
    energy: f64,
    noise_var: f64,
    beta: f64,
    channel_chips: usize,
    iota: usize,
    users: Option<usize>,
    chips: Option<usize>,
    points: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let load = LoadParams::new(beta, channel_chips, iota).map_err(to_py)?;
    let mut opts = MiOptions::default();
    if let Some(n) = points {
        opts.points = n;
    }
    opts.mode = match (users, chips) {
        (Some(users), Some(chips)) => InterferenceMode::Finite { users, chips },
        (None, None) => InterferenceMode::Asymptotic,
        _ => return Err(PyValueError::new_err("give both users and chips, or neither")),
    };
    let r = py
        .detach(|| mutual_info::mutual_information(&self_samples, &cross_samples, energy, noise_var, &load, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mi", r.mi)?;
    d.set_item("lower_bound", r.lower_bound)?;
    d.set_item("h_z", r.h_z)?;
    d.set_item("h_z_given_b", r.h_z_given_b)?;
    d.set_item("var_s", r.var_s)?;
    d.set_item("noise_var", r.noise_var)?;
    d.set_item("smoothing_injected", r.smoothing_injected)?;
    d.set_item("points", r.points)?;
    d.set_item(
        "spectral_efficiency",
        mutual_info::spectral_efficiency(r.mi, beta, iota),
    )?;
    Ok(d)
}

#[pyfunction]
fn spectral_efficiency(mi: f64, beta: f64, iota: usize) -> f64 {
    mutual_info::spectral_efficiency(mi, beta, iota)
}

/// Runs a `uwbsim` config and writes its CSV files under `output_dir`.
#[pyfunction]
#[pyo3(signature = (config_text, output_dir, seed=None))]
fn run_config<'py>(
    py: Python<'py>,
    config_text: &str,
    output_dir: PathBuf,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = cli::RunConfig::parse(config_text).map_err(to_py)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let rep = py.detach(|| cli::run(&cfg, &output_dir)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("files", rep.files)?;
    d.set_item("summary", rep.summary)?;
    d.set_item("passed", rep.passed)?;
    Ok(d)
}

#[pymodule]
fn uwbtr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyTraining>()?;
    m.add_function(wrap_pyfunction!(gen_mseq, m)?)?;
    m.add_function(wrap_pyfunction!(autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_channel, m)?)?;
    m.add_function(wrap_pyfunction!(tr_prefilter, m)?)?;
    m.add_function(wrap_pyfunction!(couplings, m)?)?;
    m.add_function(wrap_pyfunction!(receive_dl_training, m)?)?;
    m.add_function(wrap_pyfunction!(dl_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_ber, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_test, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
