#include "auecrl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "auecrl/errors.hpp"
#include "internal/text.hpp"

namespace auecrl {

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  std::ostringstream os;
  os << source << ":" << line << ": " << msg;
  throw ParseError(os.str());
}

double to_double(const std::string& source, int line, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(source, line, "expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& source, int line, const std::string& v) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(source, line, "expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& source, int line, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(source, line, "expected true/false, got '" + v + "'");
}

RelevanceLevels& ensure_levels(RunConfig& cfg) {
  if (!cfg.levels) cfg.levels = RelevanceLevels{};
  return *cfg.levels;
}

void apply_stage_key(StagePlan& plan, const std::string& source, int line,
                     const std::string& key, const std::string& value) {
  if (key == "lr") plan.lr = to_double(source, line, value);
  else if (key == "momentum") plan.momentum = to_double(source, line, value);
  else if (key == "weight_decay") plan.weight_decay = to_double(source, line, value);
  else if (key == "epochs") plan.epochs = static_cast<int>(to_int(source, line, value));
  else if (key == "batch_size") plan.batch_size = static_cast<int>(to_int(source, line, value));
  else if (key == "lr_decay_factor") plan.lr_decay_factor = to_double(source, line, value);
  else if (key == "lr_decay_every") plan.lr_decay_every = static_cast<int>(to_int(source, line, value));
  else throw ConfigError(source + ":" + std::to_string(line) + ": unknown stage key '" + key + "'");
}

void apply_global_key(RunConfig& cfg, const std::string& source, int line,
                      const std::string& key, const std::string& value) {
  if (key == "knowledge") cfg.knowledge_path = value;
  else if (key == "data") cfg.data_path = value;
  else if (key == "output_dir") cfg.output_dir = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(source, line, value));
  else if (key == "input_dim") cfg.model.input_dim = static_cast<int>(to_int(source, line, value));
  else if (key == "d_e") cfg.model.d_e = static_cast<int>(to_int(source, line, value));
  else if (key == "d_a") cfg.model.d_a = static_cast<int>(to_int(source, line, value));
  else if (key == "d") cfg.model.d = static_cast<int>(to_int(source, line, value));
  else if (key == "expressions") cfg.model.num_expressions = static_cast<int>(to_int(source, line, value));
  else if (key == "aus") cfg.model.num_aus = static_cast<int>(to_int(source, line, value));
  else if (key == "lambda") cfg.lambda = to_double(source, line, value);
  else if (key == "alpha") cfg.alpha = to_double(source, line, value);
  else if (key == "use_biases") cfg.model.use_biases = to_bool(source, line, value);
  else if (key == "levels_primary") ensure_levels(cfg).primary = to_double(source, line, value);
  else if (key == "levels_secondary") ensure_levels(cfg).secondary = to_double(source, line, value);
  else if (key == "levels_none") ensure_levels(cfg).none = to_double(source, line, value);
  else if (key == "attention_norm") {
    if (value == "softmax") cfg.model.attention_norm = AttentionNorm::kSoftmax;
    else if (value == "ratio") cfg.model.attention_norm = AttentionNorm::kRatio;
    else throw ConfigError(source + ":" + std::to_string(line) +
                           ": attention_norm must be softmax or ratio, got '" + value + "'");
  } else {
    throw ConfigError(source + ":" + std::to_string(line) + ": unknown key '" + key + "'");
  }
}

}  // namespace

void RunConfig::validate_against(const KnowledgeBase& kb) const {
  model.validate();
  if (model.num_expressions != kb.num_expressions()) {
    throw ConfigError("config expressions=" + std::to_string(model.num_expressions) +
                      " does not match the knowledge file (" +
                      std::to_string(kb.num_expressions()) + ")");
  }
  if (model.num_aus != kb.num_aus()) {
    throw ConfigError("config aus=" + std::to_string(model.num_aus) +
                      " does not match the knowledge file (" + std::to_string(kb.num_aus()) + ")");
  }
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (alpha < 0.0) throw ConfigError("alpha must be nonnegative");
  if (levels) levels->validate();
  for (int s = 1; s <= 3; ++s) {
    if (stage(s).stage != s) throw ConfigError("stage plan order corrupted");
    stage(s).validate();
  }
}

RunConfig parse_run_config(const std::string& content, const std::string& source_name) {
  RunConfig cfg;
  int section = 0;  // 0 = global, 1..3 = stage sections
  int number = 0;
  std::istringstream in(content);
  std::string raw;
  while (std::getline(in, raw)) {
    ++number;
    if (size_t hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string body{text::trim(raw)};
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body == "[stage1]") section = 1;
      else if (body == "[stage2]") section = 2;
      else if (body == "[stage3]") section = 3;
      else fail(source_name, number, "unknown section '" + body + "'");
      continue;
    }
    size_t eq = body.find('=');
    if (eq == std::string::npos) fail(source_name, number, "expected 'key = value'");
    std::string key{text::trim(std::string_view(body).substr(0, eq))};
    std::string value{text::trim(std::string_view(body).substr(eq + 1))};
    if (key.empty() || value.empty()) fail(source_name, number, "expected 'key = value'");
    if (section == 0) {
      apply_global_key(cfg, source_name, number, key, value);
    } else {
      apply_stage_key(cfg.stage(section), source_name, number, key, value);
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

}  // namespace auecrl
