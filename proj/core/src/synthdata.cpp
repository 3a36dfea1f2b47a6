#include "auecrl/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "auecrl/errors.hpp"

namespace auecrl {

void GenConfig::validate() const {
  if (n_samples < 1) throw ConfigError("gen config: n must be at least 1");
  if (input_dim < 1) throw ConfigError("gen config: input_dim must be positive");
  if (num_expressions < 2) throw ConfigError("gen config: E must be at least 2");
  if (num_aus < 2) throw ConfigError("gen config: A must be at least 2");
  if (signal_strength < 0.0) throw ConfigError("gen config: mu must be nonnegative");
  if (noise_std < 0.0) throw ConfigError("gen config: sigma must be nonnegative");
}

namespace {

Tensor unit_direction(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor v = Tensor::zeros({dim});
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (double& x : v.values()) {
      x = normal(rng);
      norm_sq += x * x;
    }
  } while (norm_sq == 0.0);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v.values()) x *= inv;
  return v;
}

}  // namespace

Dataset generate(const GenConfig& cfg, const KnowledgeBase& kb, const PriorMatrix& prior) {
  cfg.validate();
  if (cfg.num_expressions != kb.num_expressions() || cfg.num_aus != kb.num_aus()) {
    throw ConfigError("gen config: E/A do not match the knowledge file");
  }
  if (prior.values.rank() != 2 || prior.values.dim(0) != cfg.num_expressions ||
      prior.values.dim(1) != cfg.num_aus) {
    throw ConfigError("gen config: prior matrix shape mismatch");
  }

  // Directions depend only on the seed, not on n, so growing a dataset
  // keeps the planted geometry.
  std::mt19937_64 dir_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Tensor> class_centers;
  class_centers.reserve(static_cast<size_t>(cfg.num_expressions));
  for (int e = 0; e < cfg.num_expressions; ++e) {
    class_centers.push_back(unit_direction(dir_rng, cfg.input_dim));
  }
  std::vector<Tensor> au_directions;
  au_directions.reserve(static_cast<size_t>(cfg.num_aus));
  for (int a = 0; a < cfg.num_aus; ++a) {
    au_directions.push_back(unit_direction(dir_rng, cfg.input_dim));
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> label_dist(0, cfg.num_expressions - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset out;
  out.input_dim = cfg.input_dim;
  out.num_expressions = cfg.num_expressions;
  out.num_aus = cfg.num_aus;
  out.samples.reserve(static_cast<size_t>(cfg.n_samples));
  for (std::int64_t s = 0; s < cfg.n_samples; ++s) {
    SynthSample sample;
    sample.label = label_dist(rng);
    sample.au_truth.resize(static_cast<size_t>(cfg.num_aus));
    sample.x = class_centers[static_cast<size_t>(sample.label)];
    for (int a = 0; a < cfg.num_aus; ++a) {
      const bool active = unit(rng) < prior.values(sample.label, a);
      sample.au_truth[static_cast<size_t>(a)] = active ? 1 : 0;
      if (active && cfg.signal_strength > 0.0) {
        const Tensor& dir = au_directions[static_cast<size_t>(a)];
        for (int i = 0; i < cfg.input_dim; ++i) {
          sample.x(i) += cfg.signal_strength * dir(i);
        }
      }
    }
    if (cfg.noise_std > 0.0) {
      for (int i = 0; i < cfg.input_dim; ++i) {
        sample.x(i) += cfg.noise_std * noise(rng);
      }
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  out << "AUECRL-DATA v1 n=" << dataset.size() << " dim=" << dataset.input_dim
      << " E=" << dataset.num_expressions << " A=" << dataset.num_aus << "\n";
  char buf[40];
  for (const SynthSample& s : dataset.samples) {
    out << "y=" << s.label << "\n";
    out << "au=";
    for (size_t a = 0; a < s.au_truth.size(); ++a) {
      if (a) out << ' ';
      out << static_cast<int>(s.au_truth[a]);
    }
    out << "\n";
    out << "x=";
    for (std::int64_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      std::snprintf(buf, sizeof buf, "%.17g", s.x(i));  // round-trip exact
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw IOError("write failed for '" + path + "'");
}

namespace {

[[noreturn]] void record_fail(const std::string& path, std::int64_t record,
                              const std::string& msg) {
  std::ostringstream os;
  os << path << ": record " << record << ": " << msg;
  throw ParseError(os.str());
}

std::string expect_line(std::ifstream& in, const std::string& path, std::int64_t record,
                        const char* field) {
  std::string line;
  if (!std::getline(in, line)) {
    record_fail(path, record, std::string("truncated file, missing '") + field + "' line");
  }
  return line;
}

}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open dataset '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty file");
  std::int64_t n = -1;
  Dataset out;
  {
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "AUECRL-DATA" || version != "v1") {
      throw ParseError(path + ": bad header '" + header + "'");
    }
    std::string kv;
    while (hs >> kv) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError(path + ": bad header field '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const long long value = std::stoll(kv.substr(eq + 1));
      if (key == "n") n = value;
      else if (key == "dim") out.input_dim = static_cast<int>(value);
      else if (key == "E") out.num_expressions = static_cast<int>(value);
      else if (key == "A") out.num_aus = static_cast<int>(value);
      else throw ParseError(path + ": unknown header field '" + key + "'");
    }
  }
  if (n < 0 || out.input_dim < 1 || out.num_expressions < 2 || out.num_aus < 2) {
    throw ParseError(path + ": incomplete header");
  }

  out.samples.reserve(static_cast<size_t>(n));
  for (std::int64_t r = 0; r < n; ++r) {
    SynthSample s;
    std::string line = expect_line(in, path, r, "y");
    if (line.rfind("y=", 0) != 0) record_fail(path, r, "expected 'y=' line");
    s.label = std::stoi(line.substr(2));
    if (s.label < 0 || s.label >= out.num_expressions) record_fail(path, r, "label out of range");

    line = expect_line(in, path, r, "au");
    if (line.rfind("au=", 0) != 0) record_fail(path, r, "expected 'au=' line");
    {
      std::istringstream as(line.substr(3));
      int v;
      while (as >> v) {
        if (v != 0 && v != 1) record_fail(path, r, "au entries must be 0 or 1");
        s.au_truth.push_back(static_cast<std::uint8_t>(v));
      }
      if (static_cast<int>(s.au_truth.size()) != out.num_aus) {
        record_fail(path, r, "au count mismatch");
      }
    }

    line = expect_line(in, path, r, "x");
    if (line.rfind("x=", 0) != 0) record_fail(path, r, "expected 'x=' line");
    {
      std::vector<double> xs;
      xs.reserve(static_cast<size_t>(out.input_dim));
      std::istringstream vs(line.substr(2));
      double v;
      while (vs >> v) xs.push_back(v);
      if (static_cast<int>(xs.size()) != out.input_dim) {
        record_fail(path, r, "x dimension mismatch");
      }
      s.x = Tensor::vector(std::move(xs));
    }
    out.samples.push_back(std::move(s));
  }
  std::string extra;
  while (std::getline(in, extra)) {
    if (!extra.empty()) {
      throw ParseError(path + ": trailing content after " + std::to_string(n) + " records");
    }
  }
  return out;
}

}  // namespace auecrl
