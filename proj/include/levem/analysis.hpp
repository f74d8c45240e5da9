#pragma once

// Quantities extracted from trajectories: power spectra, secular
// temperature, damping-rate fits and the thermal image current.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "levem/dynamics.hpp"

namespace levem {

// ---------------------------------------------------------------------------
// Power spectral density
// ---------------------------------------------------------------------------

struct Spectrum {
  std::vector<double> frequency;  // [Hz]
  std::vector<double> psd;        // one-sided [unit^2 / Hz]
  std::string window = "hann";
  std::size_t segment_length = 0;
  std::size_t segments = 0;
  double resolution = 0.0;  // bin width [Hz]

  /// Integral of the one-sided PSD.
  double total_power() const {
    return std::accumulate(psd.begin(), psd.end(), 0.0) * resolution;
  }

  std::size_t peak_index(double f_min = 0.0) const {
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < psd.size(); ++i) {
      if (frequency[i] >= f_min && psd[i] > best_val) {
        best_val = psd[i];
        best = i;
      }
    }
    return best;
  }
};

/// Averaged periodogram (Welch): Hann-windowed segments of the signal with
/// its overall mean removed, one-sided, normalised so that total_power() equals the
/// variance of the input.
inline Spectrum estimate_psd(std::span<const double> signal, double sample_interval,
                             std::size_t segment_length, double overlap = 0.5) {
  if (segment_length < 8) throw LengthError("estimate_psd: segment length must be >= 8");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InvalidParameter("estimate_psd: overlap must lie in [0, 1)");
  if (!(sample_interval > 0.0)) throw InvalidParameter("estimate_psd: sample interval must be positive");
  if (signal.size() < 2 * segment_length) {
    throw LengthError("estimate_psd: need at least two segments (" + std::to_string(2 * segment_length) +
                      " samples), got " + std::to_string(signal.size()));
  }
  const std::size_t n = segment_length;
  const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * (1.0 - overlap))));

  std::vector<double> window(n);
  for (std::size_t i = 0; i < n; ++i) window[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / n);
  const double window_power = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);

  Eigen::FFT<double> fft;
  std::vector<double> buffer(n);
  std::vector<std::complex<double>> spectrum;
  const std::size_t bins = n / 2 + 1;
  std::vector<double> acc(bins, 0.0);
  std::size_t segments = 0;
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / signal.size();
  for (std::size_t start = 0; start + n <= signal.size(); start += hop) {
    for (std::size_t i = 0; i < n; ++i) buffer[i] = (signal[start + i] - mean) * window[i];
    fft.fwd(spectrum, buffer);
    for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spectrum[k]);
    ++segments;
  }

  Spectrum s;
  s.segment_length = n;
  s.segments = segments;
  s.resolution = 1.0 / (n * sample_interval);
  s.frequency.resize(bins);
  s.psd.resize(bins);
  const double scale = sample_interval / (window_power * segments);
  for (std::size_t k = 0; k < bins; ++k) {
    s.frequency[k] = k * s.resolution;
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    s.psd[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  return s;
}

inline Spectrum estimate_psd(const Trajectory& tr, std::size_t segment_length, double overlap = 0.5) {
  return estimate_psd(std::span<const double>(tr.z), tr.sample_interval, segment_length, overlap);
}

/// `freq_hz,psd_m2_per_hz` with an optional '#' metadata block.
inline void write_spectrum(std::ostream& os, const Spectrum& s, const std::string& metadata = {}) {
  std::istringstream meta(metadata);
  for (std::string line; std::getline(meta, line);) os << "# " << line << '\n';
  os << "# window = " << s.window << ", segment_length = " << s.segment_length
     << ", segments = " << s.segments << '\n';
  os << "freq_hz,psd_m2_per_hz\n";
  char buf[80];
  for (std::size_t k = 0; k < s.psd.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.frequency[k], s.psd[k]);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Secular motion
// ---------------------------------------------------------------------------

/// What is needed to strip micromotion and evaluate the secular energy.
/// omega_drive = 0 (or q_z = 0) means a static potential.
struct SecularFrame {
  double mass = 0.0;
  double omega_z = 0.0;
  double omega_drive = 0.0;
  double q_z = 0.0;
  double damping = 0.0;  // friction acting on the micromotion [1/s]

  static SecularFrame of(const SystemModel& s) {
    const bool paul = s.potential == Potential::Paul;
    return {s.mass, s.omega_z, paul ? s.omega_drive : 0.0, paul ? s.q_z : 0.0, s.particle_damping()};
  }
};

struct SecularPoint {
  double z = 0.0;
  double v = 0.0;
};

/// Inverts z = z_s (1 + (q/2) Re[c e^{i w_D t}]) to first order in q_z, with
/// c = 1 / (1 - i gamma / w_D) the damped micromotion response (c = 1
/// without friction):
///   z_s = z / m(t),  v_s = (v - z_s m'(t)) / m(t).
inline SecularPoint to_secular(const SecularFrame& f, double t, double z, double v) {
  if (f.omega_drive == 0.0 || f.q_z == 0.0) return {z, v};
  const double half_q = 0.5 * f.q_z;
  const std::complex<double> c = 1.0 / std::complex<double>(1.0, -f.damping / f.omega_drive);
  const std::complex<double> rot = c * std::polar(1.0, f.omega_drive * t);
  const double mod = 1.0 + half_q * rot.real();
  const double dmod = -half_q * f.omega_drive * rot.imag();
  const double z_s = z / mod;
  return {z_s, (v - z_s * dmod) / mod};
}

inline double secular_energy(const SecularFrame& f, const SecularPoint& s) {
  return 0.5 * f.mass * (s.v * s.v + f.omega_z * f.omega_z * s.z * s.z);
}

// ---------------------------------------------------------------------------
// Temperature
// ---------------------------------------------------------------------------

struct TemperatureEstimate {
  double temperature = 0.0;     // [K]
  double std_error = 0.0;       // batch-means standard error [K]
  std::size_t samples = 0;
  std::size_t batches = 0;
  /// Too few independent batches; std_error has been widened.
  bool insufficient = false;
};

inline constexpr std::size_t kMinTemperatureBatches = 20;

namespace detail {

/// Mean and batch-means standard error of x. `batch` is the batch length.
inline TemperatureEstimate batch_mean(const std::vector<double>& x, std::size_t batch) {
  TemperatureEstimate e;
  e.samples = x.size();
  if (x.empty()) {
    e.insufficient = true;
    return e;
  }
  e.temperature = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  batch = std::max<std::size_t>(1, batch);
  e.batches = x.size() / batch;
  if (e.batches >= 2) {
    double ss = 0.0;
    for (std::size_t b = 0; b < e.batches; ++b) {
      const double m = std::accumulate(x.begin() + b * batch, x.begin() + (b + 1) * batch, 0.0) / batch;
      ss += (m - e.temperature) * (m - e.temperature);
    }
    e.std_error = std::sqrt(ss / (e.batches - 1) / e.batches);
  }
  if (e.batches < kMinTemperatureBatches) {
    e.insufficient = true;
    // Fall back to the single-sample spread, inflated for the small count.
    const double widen = e.batches >= 2 ? std::sqrt(static_cast<double>(kMinTemperatureBatches) / e.batches) : 1.0;
    e.std_error = std::max(e.std_error * widen, e.temperature);
  }
  return e;
}

}  // namespace detail

/// Secular centre-of-mass temperature T = M <v_s^2> / k_B over samples with
/// t >= t_start, v_s being the micromotion-stripped velocity. Errors are
/// batch means over `correlation_time` (typically a few 1/gamma).
inline TemperatureEstimate estimate_temperature(const Trajectory& tr, const SecularFrame& f, double t_start,
                                                double correlation_time) {
  std::vector<double> inst;
  inst.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.t[i] < t_start) continue;
    const auto s = to_secular(f, tr.t[i], tr.z[i], tr.v[i]);
    inst.push_back(f.mass * s.v * s.v / kBoltzmann);
  }
  const std::size_t batch =
      tr.sample_interval > 0.0 ? static_cast<std::size_t>(std::ceil(correlation_time / tr.sample_interval)) : 1;
  return detail::batch_mean(inst, batch);
}

/// Same quantity from the integrated velocity PSD of the secular velocity.
inline double estimate_temperature_psd(const Trajectory& tr, const SecularFrame& f, double t_start,
                                       std::size_t segment_length) {
  std::vector<double> vs;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.t[i] < t_start) continue;
    vs.push_back(to_secular(f, tr.t[i], tr.z[i], tr.v[i]).v);
  }
  const Spectrum s = estimate_psd(vs, tr.sample_interval, segment_length, 0.5);
  return f.mass * s.total_power() / kBoltzmann;
}

/// Ensemble temperature: one value per trajectory, combined with the
/// standard error of the mean across trajectories.
inline TemperatureEstimate ensemble_temperature(std::span<const double> per_trajectory) {
  TemperatureEstimate e;
  e.samples = per_trajectory.size();
  e.batches = per_trajectory.size();
  if (per_trajectory.empty()) {
    e.insufficient = true;
    return e;
  }
  const double n = static_cast<double>(per_trajectory.size());
  e.temperature = std::accumulate(per_trajectory.begin(), per_trajectory.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : per_trajectory) ss += (x - e.temperature) * (x - e.temperature);
  e.std_error = per_trajectory.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : e.temperature;
  e.insufficient = per_trajectory.size() < 2;
  return e;
}

// ---------------------------------------------------------------------------
// Damping-rate fit
// ---------------------------------------------------------------------------

struct DampingFit {
  double rate = 0.0;      // [1/s]
  double residual = 0.0;  // RMS residual of the log fit
  std::size_t points = 0;
  bool poor_fit = false;
  bool overdamped = false;  // rate taken from the momentum decay
};

inline constexpr double kPoorFitResidual = 0.1;

/// Least-squares line through (t, log y); rate = -slope. Points with
/// y <= 0 are rejected.
inline DampingFit fit_exponential(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size()) throw LengthError("fit_exponential: size mismatch");
  DampingFit fit;
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(y[i] > 0.0)) throw NumericalError("fit_exponential: non-positive sample");
    const double l = std::log(y[i]);
    st += t[i];
    sl += l;
    stt += t[i] * t[i];
    stl += t[i] * l;
    ++n;
  }
  fit.points = n;
  if (n < 3) {
    fit.poor_fit = true;
    return fit;
  }
  const double mt = st / n;
  const double ml = sl / n;
  const double var = stt / n - mt * mt;
  if (!(var > 0.0)) {
    fit.poor_fit = true;
    return fit;
  }
  const double slope = (stl / n - mt * ml) / var;
  fit.rate = -slope;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(y[i]) - (ml + slope * (t[i] - mt));
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  fit.poor_fit = fit.residual > kPoorFitResidual || !(fit.rate > 0.0);
  return fit;
}

/// Streaming ring-down analysis of one trajectory.
///
/// Underdamped motion: the secular energy is averaged between consecutive
/// zero crossings of z_s and an exponential is fitted to the window means.
/// For linear friction z = exp(-gamma t / 2) y(t) with y bounded, so the
/// means decay as exp(-gamma t) whatever the trap.
///
/// With fewer than `min_windows` crossings the motion is overdamped and
/// gamma comes from the lab-frame energy balance with F = k(t) z,
///   H(t) - H(0) + int (1/2) k' z^2 dt = -gamma (int M v^2 dt - k_B T t),
/// which needs samples fine enough to resolve the drive.
class RingdownTracker {
 public:
  RingdownTracker(const SystemModel& s, double bath_temperature = 0.0)
      : model_(s), frame_(SecularFrame::of(s)), bath_energy_(kBoltzmann * bath_temperature) {}

  void push(double t, double z, double v) {
    const SecularPoint s = to_secular(frame_, t, z, v);
    const double e = secular_energy(frame_, s);
    const double k = model_.trap_stiffness(t);
    const double h_lab = 0.5 * model_.mass * v * v - 0.5 * k * z * z;
    const double mv2 = model_.mass * v * v;
    if (started_) {
      const double h = t - last_t_;
      acc_ += 0.5 * h * (e + last_e_);
      drive_work_ += 0.25 * (k - last_k_) * (z * z + last_zl_ * last_zl_);
      friction_ += 0.5 * h * (mv2 + last_mv2_);
      const double x = -(friction_ - bath_energy_ * (t - t0_));
      const double y = h_lab - h0_ + drive_work_;
      sxx_ += x * x;
      sxy_ += x * y;
      syy_ += y * y;
      ++balance_points_;
      if ((s.z > 0.0) != (last_z_ > 0.0) || s.z == 0.0) {
        // Crossing time by linear interpolation.
        const double frac = last_z_ == s.z ? 1.0 : last_z_ / (last_z_ - s.z);
        const double tc = last_t_ + frac * h;
        const double ec = last_e_ + frac * (e - last_e_);
        const double split = 0.5 * (t - tc) * (e + ec);
        if (open_) {
          const double len = tc - window_start_;
          if (len > 0.0) {
            win_t_.push_back(0.5 * (tc + window_start_));
            win_e_.push_back((acc_ - split) / len);
          }
        }
        open_ = true;
        window_start_ = tc;
        acc_ = split;
      }
    } else {
      t0_ = t;
      h0_ = h_lab;
      if (z == 0.0) {
        open_ = true;
        window_start_ = t;
      }
    }
    started_ = true;
    last_t_ = t;
    last_e_ = e;
    last_z_ = s.z;
    last_zl_ = z;
    last_k_ = k;
    last_mv2_ = mv2;
  }

  /// `floor`: windows whose excess energy has fallen below floor times the
  /// first excess are ignored.
  DampingFit fit(double floor = 1e-6, std::size_t min_windows = 4) const {
    std::vector<double> ts, ys;
    if (win_t_.size() >= min_windows) {
      collect(win_t_, win_e_, bath_energy_, floor, ts, ys);
      if (ts.size() >= min_windows) return fit_exponential(ts, ys);
    }
    DampingFit fit;
    fit.overdamped = true;
    fit.points = balance_points_;
    if (!(sxx_ > 0.0) || !(syy_ > 0.0)) {
      fit.poor_fit = true;
      return fit;
    }
    fit.rate = sxy_ / sxx_;
    fit.residual = std::sqrt(std::max(0.0, 1.0 - sxy_ * sxy_ / (sxx_ * syy_)));
    fit.poor_fit = fit.residual > kPoorFitResidual || !(fit.rate > 0.0);
    return fit;
  }

  std::size_t windows() const { return win_t_.size(); }

 private:
  static void collect(const std::vector<double>& t, const std::vector<double>& y, double base, double floor,
                      std::vector<double>& ts, std::vector<double>& ys) {
    ts.clear();
    ys.clear();
    if (y.empty()) return;
    const double first = y.front() - base;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = y[i] - base;
      if (!(x > floor * first)) break;
      ts.push_back(t[i]);
      ys.push_back(x);
    }
  }

  SystemModel model_;
  SecularFrame frame_;
  double bath_energy_;
  double t0_ = 0.0, h0_ = 0.0;
  double last_zl_ = 0.0, last_k_ = 0.0, last_mv2_ = 0.0;
  double drive_work_ = 0.0, friction_ = 0.0;
  double sxx_ = 0.0, sxy_ = 0.0, syy_ = 0.0;
  std::size_t balance_points_ = 0;
  bool started_ = false;
  bool open_ = false;
  double last_t_ = 0.0, last_e_ = 0.0, last_z_ = 0.0;
  double window_start_ = 0.0;
  double acc_ = 0.0;
  std::vector<double> win_t_, win_e_;
};

inline DampingFit fit_damping_rate(const Trajectory& tr, const SystemModel& s, double bath_temperature = 0.0,
                                   double floor = 1e-6) {
  RingdownTracker rt(s, bath_temperature);
  for (std::size_t i = 0; i < tr.size(); ++i) rt.push(tr.t[i], tr.z[i], tr.v[i]);
  return rt.fit(floor);
}

/// Relaxation rate of an ensemble-mean secular energy towards k_B T_bath.
/// The mean is averaged over blocks of length `block` (a whole number of
/// drive periods removes the residual micromotion) before the log fit,
/// which stops once the excess falls below `floor` of its first value.
inline DampingFit fit_relaxation(std::span<const double> times, std::span<const double> mean_energy,
                                 double bath_temperature, double block, double floor = 0.05) {
  if (times.size() != mean_energy.size()) throw LengthError("fit_relaxation: size mismatch");
  if (!(block > 0.0)) throw InvalidParameter("fit_relaxation: block must be positive");
  std::vector<double> bt, be;
  std::size_t i = 0;
  while (i < times.size()) {
    const double t0 = times[i];
    double sum = 0.0;
    std::size_t n = 0;
    while (i < times.size() && times[i] < t0 + block) {
      sum += mean_energy[i];
      ++n;
      ++i;
    }
    if (i >= times.size() && times.back() - t0 < 0.5 * block) break;
    bt.push_back(t0 + 0.5 * block);
    be.push_back(sum / n);
  }
  std::vector<double> ts, ys;
  const double base = kBoltzmann * bath_temperature;
  if (be.empty()) throw LengthError("fit_relaxation: no complete block");
  const double first = be.front() - base;
  for (std::size_t k = 0; k < bt.size(); ++k) {
    const double x = be[k] - base;
    if (!(x > floor * first)) break;
    ts.push_back(bt[k]);
    ys.push_back(x);
  }
  return fit_exponential(ts, ys);
}


// ---------------------------------------------------------------------------
// Image current
// ---------------------------------------------------------------------------

/// I_max = (q eta / d) sqrt(k_B T / M).
inline double peak_current(const ParticleSpec& p, const TrapConfig& trap, double t_cm) {
  if (!(t_cm >= 0.0)) throw InvalidParameter("peak_current: temperature must be >= 0");
  return std::abs(p.charge()) * trap.eta / trap.d * std::sqrt(kBoltzmann * t_cm / p.mass());
}

}  // namespace levem
