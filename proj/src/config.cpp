#include "ddi/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "ddi/error.hpp"
#include "ddi/manifest.hpp"

namespace ddi::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty()) throw UsageError("config key " + key + ": bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw UsageError("config key " + key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream in(v);
  for (std::string item; std::getline(in, item, ',');) out.push_back(trim(item));
  return out;
}

std::string format_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Section, typename T>
Field field(std::string key, Section RunConfig::*section, T Section::*member) {
  Field f{key, {}, {}};
  f.get = [section, member](const RunConfig& c) -> std::string {
    const T& v = c.*section.*member;
    if constexpr (std::is_same_v<T, bool>)
      return v ? "true" : "false";
    else if constexpr (std::is_same_v<T, double>)
      return format_double(v);
    else if constexpr (std::is_same_v<T, std::vector<std::string>>)
      return join(v);
    else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      std::vector<std::string> s;
      for (auto x : v) s.push_back(std::to_string(x));
      return join(s);
    } else
      return std::to_string(v);
  };
  f.set = [key, section, member](RunConfig& c, const std::string& v) {
    T& out = c.*section.*member;
    if constexpr (std::is_same_v<T, bool>)
      out = parse_bool(key, v);
    else if constexpr (std::is_same_v<T, std::vector<std::string>>)
      out = parse_list(v);
    else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      out.clear();
      for (const auto& x : parse_list(v)) out.push_back(parse_number<std::size_t>(key, x));
    } else
      out = parse_number<T>(key, v);
  };
  return f;
}

Field top(std::string key, std::size_t RunConfig::*member) {
  return Field{key, [member](const RunConfig& c) { return std::to_string(c.*member); },
               [key, member](RunConfig& c, const std::string& v) { c.*member = parse_number<std::size_t>(key, v); }};
}

const std::vector<Field>& fields() {
  using M = model::ModelConfig;
  using T = train::TrainConfig;
  using I = infer::InferConfig;
  using B = train::BootstrapConfig;
  using A = nn::AdamState;
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    const auto m = &RunConfig::model;
    f.push_back(field("model.word_dim", m, &M::word_dim));
    f.push_back(field("model.char_dim", m, &M::char_dim));
    f.push_back(field("model.char_filters", m, &M::char_filters));
    f.push_back(field("model.char_window", m, &M::char_window));
    f.push_back(field("model.hidden", m, &M::hidden));
    f.push_back(field("model.rel_windows", m, &M::rel_windows));
    f.push_back(field("model.rel_filters", m, &M::rel_filters));
    f.push_back(field("model.dropout", m, &M::dropout));
    f.push_back(field("model.residual_words", m, &M::residual_words));
    f.push_back(field("model.init_scale", m, &M::init_scale));
    f.push_back(field("model.forget_bias", m, &M::forget_bias));
    const auto t = &RunConfig::train;
    f.push_back(field("train.epochs", t, &T::epochs));
    f.push_back(field("train.target_iterations", t, &T::target_iterations));
    f.push_back(field("train.non_o_weight", t, &T::non_o_weight));
    f.push_back(field("train.primary_weight", t, &T::primary_weight));
    f.push_back(field("train.encoder_grad_scale", t, &T::encoder_grad_scale));
    f.push_back(field("train.dev_labels", t, &T::dev_labels));
    f.push_back(field("train.seed", t, &T::seed));
    f.push_back(field("train.merge_coordination", t, &T::merge_coordination));
    f.push_back(field("train.select_checkpoint", t, &T::select_checkpoint));
    auto adam = [](std::string key, double A::*member) {
      return Field{key, [member](const RunConfig& c) { return format_double(c.train.adam.*member); },
                   [key, member](RunConfig& c, const std::string& v) {
                     c.train.adam.*member = parse_number<double>(key, v);
                   }};
    };
    f.push_back(adam("train.learning_rate", &A::learning_rate));
    f.push_back(adam("train.beta1", &A::beta1));
    f.push_back(adam("train.beta2", &A::beta2));
    f.push_back(adam("train.epsilon", &A::epsilon));
    const auto i = &RunConfig::infer;
    f.push_back(field("infer.modifiers", i, &I::modifiers));
    f.push_back(field("infer.stopwords", i, &I::stopwords));
    f.push_back(field("infer.generic_terms", i, &I::generic_terms));
    f.push_back(field("infer.class_proxies", i, &I::class_proxies));
    f.push_back(field("infer.use_class_proxies", i, &I::use_class_proxies));
    f.push_back(field("infer.coordination", i, &I::coordination));
    f.push_back(field("infer.coordination_heads", i, &I::coordination_heads));
    f.push_back(field("infer.pd_threshold", i, &I::pd_threshold));
    const auto b = &RunConfig::bootstrap;
    f.push_back(field("bootstrap.threshold", b, &B::threshold));
    f.push_back(field("bootstrap.max_iterations", b, &B::max_iterations));
    f.push_back(field("bootstrap.epochs_per_iteration", b, &B::epochs_per_iteration));
    f.push_back(top("ensemble.size", &RunConfig::ensemble_size));
    f.push_back(top("ensemble.min_votes", &RunConfig::min_votes));
    f.push_back(top("ensemble.workers", &RunConfig::workers));
    return f;
  }();
  return all;
}

}  // namespace

void RunConfig::finalize() {
  infer.normalize();
  train.class_proxies = infer.class_proxies;
  train.use_class_proxies = infer.use_class_proxies;
  model.check();
  train.check();
  infer.check();
  bootstrap.check();
  if (ensemble_size == 0) throw UsageError("ensemble.size must be positive");
  if (min_votes == 0 || min_votes > ensemble_size) throw UsageError("ensemble.min_votes must lie in [1, ensemble.size]");
  if (workers == 0) throw UsageError("ensemble.workers must be positive");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw UsageError("unknown config key '" + key + "'");
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + assignment + "'");
  set_config_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  bool versioned = false;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key = value", number, 1);
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!versioned) {
      if (key != "version" || value != kConfigVersion)
        throw ParseError("config: first setting must be 'version = " + std::string(kConfigVersion) + "'", number, 1);
      versioned = true;
      continue;
    }
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw ParseError("config: duplicate key '" + key + "'", number, 1);
    seen.push_back(key);
    try {
      set_config_value(config, key, value);
    } catch (const UsageError& e) {
      throw ParseError(std::string("config: ") + e.what(), number, 1);
    }
  }
  if (!versioned) throw ParseError("config: missing 'version = " + std::string(kConfigVersion) + "' line");
  return config;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string serialize_config(const RunConfig& config) {
  std::string out = "version = " + std::string(kConfigVersion) + "\n";
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ddi::cli
