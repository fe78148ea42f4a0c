#include "tsgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tsgan::data {

SeriesBatch concat_batches(const SeriesBatch& a, const SeriesBatch& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  if (a.length != b.length) throw ShapeError("concat_batches: record lengths differ");
  SeriesBatch out(a.count + b.count, a.length);
  std::copy(a.values.begin(), a.values.end(), out.values.begin());
  std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.values.size());
  return out;
}

void validate(const SineCorpusConfig& cfg) {
  if (cfg.length < 1) throw ValueError("sine config: length must be >= 1");
  if (!(cfg.amp_lo > 0.0) || !(cfg.amp_lo <= cfg.amp_hi))
    throw ValueError("sine config: amplitude range [" + format_double(cfg.amp_lo) + ", " +
                     format_double(cfg.amp_hi) + "] must satisfy 0 < lo <= hi");
  if (!(cfg.freq_lo > 0.0) || !(cfg.freq_lo <= cfg.freq_hi))
    throw ValueError("sine config: frequency range [" + format_double(cfg.freq_lo) + ", " +
                     format_double(cfg.freq_hi) + "] must satisfy 0 < lo <= hi");
  if (!(cfg.phase_lo <= cfg.phase_hi))
    throw ValueError("sine config: phase range [" + format_double(cfg.phase_lo) + ", " +
                     format_double(cfg.phase_hi) + "] must satisfy lo <= hi");
}

std::pair<SeriesBatch, SeriesBatch> generate_sine_corpus(const SineCorpusConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const double step = 2.0 * 3.14159265358979323846 / static_cast<double>(cfg.length);
  auto fill = [&](SeriesBatch& batch) {
    for (std::size_t i = 0; i < batch.count; ++i) {
      const double amp = rng.uniform(cfg.amp_lo, cfg.amp_hi);
      const double freq = rng.uniform(cfg.freq_lo, cfg.freq_hi);
      const double phase = rng.uniform(cfg.phase_lo, cfg.phase_hi);
      double* row = batch.row_ptr(i);
      for (std::size_t t = 0; t < cfg.length; ++t)
        row[t] = amp * std::sin(freq * static_cast<double>(t) * step + phase);
    }
  };
  SeriesBatch train(cfg.n_train, cfg.length);
  SeriesBatch test(cfg.n_test, cfg.length);
  fill(train);
  fill(test);
  return {std::move(train), std::move(test)};
}

namespace {

// Strict double parse of a whole CSV field.
bool parse_field(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<EcgRecord> load_ecg_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("ecg csv: cannot open " + path);
  std::vector<EcgRecord> records;
  std::string line;
  std::size_t row = 0;
  constexpr std::size_t kCols = 188;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != kCols)
      throw IoError("ecg csv: row " + std::to_string(row) + " has " +
                    std::to_string(fields.size()) + " columns, expected 188");
    EcgRecord rec;
    rec.samples.resize(kCols - 1);
    for (std::size_t c = 0; c + 1 < kCols; ++c) {
      double v;
      if (!parse_field(fields[c], v))
        throw IoError("ecg csv: row " + std::to_string(row) + " column " + std::to_string(c + 1) +
                      " is not numeric: '" + fields[c] + "'");
      if (v < -1e-9 || v > 1.0 + 1e-9)
        throw IoError("ecg csv: row " + std::to_string(row) + " value " + format_double(v) +
                      " outside [0, 1]");
      rec.samples[c] = std::clamp(v, 0.0, 1.0);
    }
    double label;
    if (!parse_field(fields[kCols - 1], label) || label != std::floor(label))
      throw IoError("ecg csv: row " + std::to_string(row) + " label is not an integer: '" +
                    fields[kCols - 1] + "'");
    rec.label = static_cast<int>(label);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<double> resample_linear(std::span<const double> x, std::size_t out_len) {
  if (x.empty()) throw ValueError("resample: empty input");
  if (out_len == 0) throw ValueError("resample: empty output requested");
  std::vector<double> out(out_len);
  if (out_len == 1) {
    out[0] = x[0];
    return out;
  }
  if (x.size() == 1) {
    std::fill(out.begin(), out.end(), x[0]);
    return out;
  }
  const double scale = static_cast<double>(x.size() - 1) / static_cast<double>(out_len - 1);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * scale;
    std::size_t k = static_cast<std::size_t>(pos);
    if (k >= x.size() - 1) k = x.size() - 2;
    const double frac = pos - static_cast<double>(k);
    out[i] = x[k] + frac * (x[k + 1] - x[k]);
  }
  return out;
}

EcgRecord make_two_peak(const EcgRecord& rec, const TwoPeakConfig& cfg) {
  // trailing zero-padding run is not part of the beat
  std::size_t core_len = rec.samples.size();
  while (core_len > 0 && rec.samples[core_len - 1] == 0.0) --core_len;
  if (core_len == 0) throw ValueError("make_two_peak: all-zero record has no core");
  const std::size_t trimmed = rec.samples.size() - core_len;
  const std::size_t pad_len = std::max(trimmed, cfg.min_pad);

  double mean = 0.0;
  for (std::size_t i = 0; i < core_len; ++i) mean += rec.samples[i];
  mean /= static_cast<double>(core_len);

  std::vector<double> joined;
  joined.reserve(2 * core_len + pad_len);
  joined.insert(joined.end(), rec.samples.begin(), rec.samples.begin() + core_len);
  joined.insert(joined.end(), pad_len, mean);
  joined.insert(joined.end(), rec.samples.begin(), rec.samples.begin() + core_len);

  EcgRecord out;
  out.label = rec.label;
  out.samples = resample_linear(joined, cfg.target_length);

  double mn = out.samples[0], mx = out.samples[0];
  for (double v : out.samples) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  if (mn < 0.0 || mx > 1.0) {
    const double range = mx - mn;
    for (double& v : out.samples) v = range > 0.0 ? (v - mn) / range : 0.0;
  }
  return out;
}

std::vector<std::size_t> detect_r_peaks(std::span<const double> series, double threshold) {
  std::vector<std::size_t> peaks;
  const std::size_t n = series.size();
  std::size_t i = 1;
  while (i < n) {
    if (series[i] > threshold) {
      // extend over a plateau of equal values
      std::size_t j = i;
      while (j + 1 < n && series[j + 1] == series[i]) ++j;
      const bool left_lower = series[i - 1] < series[i];
      const bool right_lower = j + 1 < n && series[j + 1] < series[i];
      if (left_lower && right_lower) peaks.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

std::vector<std::vector<double>> preprocess_raw_windows(std::span<const double> signal,
                                                        const RawWindowConfig& cfg) {
  std::vector<std::vector<double>> out;
  if (signal.empty()) return out;
  if (cfg.source_hz <= 0 || cfg.target_hz <= 0 || cfg.gain <= 0)
    throw ValueError("raw window config: rates and gain must be positive");

  std::vector<double> degained(signal.begin(), signal.end());
  for (double& v : degained) v /= cfg.gain;

  const std::size_t resampled_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(static_cast<double>(degained.size()) * cfg.target_hz / cfg.source_hz)));
  std::vector<double> resampled = resample_linear(degained, resampled_len);

  const std::size_t win = static_cast<std::size_t>(std::llround(cfg.window_seconds * cfg.target_hz));
  if (win == 0) throw ValueError("raw window config: window too short");

  for (std::size_t start = 0; start + win <= resampled.size(); start += win) {
    std::vector<double> w(resampled.begin() + start, resampled.begin() + start + win);
    double mn = w[0], mx = w[0];
    for (double v : w) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (mx <= mn) continue;  // flat window, nothing to segment
    for (double& v : w) v = (v - mn) / (mx - mn);

    std::vector<std::size_t> peaks = detect_r_peaks(w, cfg.peak_threshold);
    if (peaks.size() < 2) continue;

    std::vector<double> gaps(peaks.size() - 1);
    for (std::size_t i = 0; i + 1 < peaks.size(); ++i)
      gaps[i] = static_cast<double>(peaks[i + 1] - peaks[i]);
    std::sort(gaps.begin(), gaps.end());
    const std::size_t mid = gaps.size() / 2;
    const double median_gap =
        gaps.size() % 2 == 1 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
    const std::size_t slice_len =
        static_cast<std::size_t>(std::ceil(cfg.slice_factor * median_gap));
    if (slice_len == 0) continue;

    for (std::size_t p : peaks) {
      std::vector<double> slice(cfg.output_length, 0.0);
      const std::size_t avail = std::min(slice_len, w.size() - p);
      const std::size_t take = std::min(avail, cfg.output_length);
      std::copy(w.begin() + p, w.begin() + p + take, slice.begin());
      out.push_back(std::move(slice));
    }
  }
  return out;
}

void save_corpus_csv(const std::string& path, const SeriesBatch& batch,
                     std::span<const int> labels) {
  if (!labels.empty() && labels.size() != batch.count)
    throw ShapeError("corpus csv: label count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("corpus csv: cannot write " + path);
  for (std::size_t c = 0; c < batch.length; ++c) out << "v" << c << ",";
  out << "label\n";
  for (std::size_t i = 0; i < batch.count; ++i) {
    const double* row = batch.row_ptr(i);
    for (std::size_t c = 0; c < batch.length; ++c) out << format_double(row[c]) << ",";
    out << (labels.empty() ? 0 : labels[i]) << "\n";
  }
  if (!out) throw IoError("corpus csv: write failed for " + path);
}

SeriesBatch load_corpus_csv(const std::string& path, std::vector<int>* labels) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus csv: cannot open " + path);
  SeriesBatch batch;
  if (labels) labels->clear();
  std::string line;
  std::size_t row = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    double probe;
    if (row == 1 && !parse_field(fields[0], probe)) {
      cols = fields.size();
      continue;  // header
    }
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols)
      throw IoError("corpus csv: row " + std::to_string(row) + " has " +
                    std::to_string(fields.size()) + " columns, expected " + std::to_string(cols));
    if (cols < 2) throw IoError("corpus csv: need at least one value column plus label");
    std::vector<double> vals(cols - 1);
    for (std::size_t c = 0; c + 1 < cols; ++c) {
      if (!parse_field(fields[c], vals[c]))
        throw IoError("corpus csv: row " + std::to_string(row) + " column " + std::to_string(c + 1) +
                      " is not numeric: '" + fields[c] + "'");
    }
    double label;
    if (!parse_field(fields[cols - 1], label) || label != std::floor(label))
      throw IoError("corpus csv: row " + std::to_string(row) + " label is not an integer");
    batch.append_row(vals);
    if (labels) labels->push_back(static_cast<int>(label));
  }
  return batch;
}

BatchIterator::BatchIterator(const SeriesBatch& data, std::size_t m, Rng& rng)
    : data_(data), m_(m), rng_(rng) {
  if (m == 0) throw ValueError("batch iterator: batch size must be positive");
  if (m > data.count)
    throw ValueError("batch iterator: batch size " + std::to_string(m) + " exceeds dataset size " +
                     std::to_string(data.count));
  order_.resize(data.count);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchIterator::reshuffle() {
  rng_.shuffle(order_);
  pos_ = 0;
}

SeriesBatch BatchIterator::next() {
  if (pos_ + m_ > batches_per_epoch() * m_) reshuffle();
  SeriesBatch out(m_, data_.length);
  for (std::size_t i = 0; i < m_; ++i) {
    auto r = data_.row(order_[pos_ + i]);
    std::copy(r.begin(), r.end(), out.row_ptr(i));
  }
  pos_ += m_;
  return out;
}

}  // namespace tsgan::data
