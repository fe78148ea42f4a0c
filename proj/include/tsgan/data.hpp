#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsgan/common.hpp"
#include "tsgan/rng.hpp"

namespace tsgan::data {

/// Matrix of fixed-length real series, one record per row.
struct SeriesBatch {
  std::size_t count = 0;
  std::size_t length = 0;
  std::vector<double> values;  // row-major count x length

  SeriesBatch() = default;
  SeriesBatch(std::size_t n, std::size_t len) : count(n), length(len), values(n * len, 0.0) {}

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * length, length};
  }
  double* row_ptr(std::size_t i) { return values.data() + i * length; }
  const double* row_ptr(std::size_t i) const { return values.data() + i * length; }

  void append_row(std::span<const double> r) {
    if (length == 0) length = r.size();
    if (r.size() != length) throw ShapeError("series batch: row length mismatch");
    values.insert(values.end(), r.begin(), r.end());
    ++count;
  }

  SeriesBatch select(std::span<const std::size_t> idx) const {
    SeriesBatch out(idx.size(), length);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto r = row(idx[i]);
      std::copy(r.begin(), r.end(), out.row_ptr(i));
    }
    return out;
  }
};

SeriesBatch concat_batches(const SeriesBatch& a, const SeriesBatch& b);

// ---- sine corpus ----

struct SineCorpusConfig {
  std::size_t n_train = 10000;
  std::size_t n_test = 3000;
  std::size_t length = 40;
  double amp_lo = 0.1, amp_hi = 0.9;
  double freq_lo = 2.0, freq_hi = 6.0;  // cycles over the window
  double phase_lo = -3.14159265358979323846, phase_hi = 3.14159265358979323846;
  std::uint64_t seed = 0;
};

/// Throws ValueError naming the offending field.
void validate(const SineCorpusConfig& cfg);

/// Waves w[t] = A sin(omega * t * 2*pi/length + phi) on t = 0..length-1 with
/// A, omega, phi drawn uniformly from the configured ranges, so omega counts
/// full cycles across the window.
std::pair<SeriesBatch, SeriesBatch> generate_sine_corpus(const SineCorpusConfig& cfg);

// ---- ECG pipeline ----

struct EcgRecord {
  std::vector<double> samples;  // length 187, values in [0, 1]
  int label = 0;                // 0 = normal
};

/// Strict loader for the preprocessed beat format: rows of 188 comma-separated
/// numbers (187 samples + trailing integer label), no header. Malformed rows
/// raise IoError naming the 1-based row.
std::vector<EcgRecord> load_ecg_csv(const std::string& path);

struct TwoPeakConfig {
  std::size_t target_length = 187;
  std::size_t min_pad = 4;  // joint pad block is max(trimmed zeros, min_pad) wide
};

/// Trims the trailing zero-padding run, concatenates [core, pad, core] with a
/// pad block of the core mean, and linearly resamples to target_length.
EcgRecord make_two_peak(const EcgRecord& rec, const TwoPeakConfig& cfg = {});

/// Indices of strict local maxima above threshold. A plateau counts once and
/// reports its first index; runs touching either boundary do not qualify.
std::vector<std::size_t> detect_r_peaks(std::span<const double> series, double threshold = 0.9);

struct RawWindowConfig {
  double source_hz = 360.0;
  double target_hz = 125.0;
  double gain = 200.0;  // adu/mV, divided out
  double window_seconds = 10.0;
  double peak_threshold = 0.9;
  double slice_factor = 1.2;       // slice length = ceil(factor * median RR gap)
  std::size_t output_length = 187; // zero-pad / truncate
};

/// Gain removal, linear resample to target_hz, non-overlapping windows,
/// per-window min-max normalization, then one slice per detected R-peak.
/// Windows with fewer than two peaks are skipped.
std::vector<std::vector<double>> preprocess_raw_windows(std::span<const double> signal,
                                                        const RawWindowConfig& cfg = {});

/// Linear interpolation onto out_len evenly spaced points (endpoints kept).
std::vector<double> resample_linear(std::span<const double> x, std::size_t out_len);

// ---- corpus CSV (header v0..v{T-1},label; one integer label per row) ----

void save_corpus_csv(const std::string& path, const SeriesBatch& batch,
                     std::span<const int> labels = {});
SeriesBatch load_corpus_csv(const std::string& path, std::vector<int>* labels = nullptr);

// ---- batching ----

/// Epoch-shuffled, non-overlapping batches of m records; the final partial
/// batch is dropped. next() reshuffles when an epoch is exhausted.
class BatchIterator {
 public:
  BatchIterator(const SeriesBatch& data, std::size_t m, Rng& rng);

  std::size_t batches_per_epoch() const { return data_.count / m_; }
  SeriesBatch next();

 private:
  void reshuffle();

  const SeriesBatch& data_;
  std::size_t m_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace tsgan::data
