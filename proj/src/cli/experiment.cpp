#include "zseg/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "zseg/errors.hpp"

namespace zseg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("setting '" + key + "' has invalid value '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("setting '" + key + "' expects true or false, got '" + text + "'");
}

int positive(const std::string& key, int v) {
  if (v < 1) throw ConfigError("setting '" + key + "' must be positive");
  return v;
}

}  // namespace

std::string to_string(Profile profile) { return profile == Profile::desk ? "desk" : "full"; }

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::desk;
  if (name == "full") return Profile::full;
  throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
}

Settings parse_settings(const std::string& text, const std::string& source) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError(where + ": repeated key '" + key + "'");
  }
  return out;
}

Settings read_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_settings(text.str(), path.string());
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys{
      "profile", "seed", "arch", "regime", "data", "out", "pretrained", "checkpoint", "resume",
      "base_width", "levels", "discriminator_levels", "epochs", "batch_size", "lr", "disc_lr",
      "momentum", "weight_decay", "lambda_seg", "patients", "slices", "divisor", "dataset",
      "patient", "slice"};
  return keys;
}

ExperimentConfig make_experiment_config(const Settings& settings) {
  ExperimentConfig c;
  const auto& keys = setting_keys();
  for (const auto& [key, value] : settings) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown setting '" + key + "'");
    }
    if (key == "profile") c.profile = parse_profile(value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "arch") c.arch = parse_architecture(value);
    else if (key == "regime") c.regime = parse_regime(value);
    else if (key == "data") c.data_root = value;
    else if (key == "out") c.out = value;
    else if (key == "pretrained") c.pretrained = value;
    else if (key == "checkpoint") c.checkpoint = value;
    else if (key == "resume") c.resume = parse_bool(key, value);
    else if (key == "base_width") c.base_width = positive(key, parse_number<int>(key, value));
    else if (key == "levels") c.levels = positive(key, parse_number<int>(key, value));
    else if (key == "discriminator_levels") c.discriminator_levels = positive(key, parse_number<int>(key, value));
    else if (key == "epochs") c.epochs = positive(key, parse_number<int>(key, value));
    else if (key == "batch_size") c.batch_size = positive(key, parse_number<int>(key, value));
    else if (key == "lr") c.lr = parse_number<double>(key, value);
    else if (key == "disc_lr") c.disc_lr = parse_number<double>(key, value);
    else if (key == "momentum") c.momentum = parse_number<double>(key, value);
    else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, value);
    else if (key == "lambda_seg") c.lambda_seg = parse_number<double>(key, value);
    else if (key == "patients") c.patients = positive(key, parse_number<int>(key, value));
    else if (key == "slices") c.slices = positive(key, parse_number<int>(key, value));
    else if (key == "divisor") c.divisor = positive(key, parse_number<int>(key, value));
    else if (key == "dataset") c.dataset = parse_dataset_id(value);
    else if (key == "patient") c.patient = positive(key, parse_number<int>(key, value));
    else if (key == "slice") c.slice = positive(key, parse_number<int>(key, value));
  }
  return c;
}

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw ConfigError("a seed is required (--seed or 'seed = N' in the config file)");
  return *seed;
}

TrainConfig ExperimentConfig::train_config() const {
  const std::uint64_t s = require_seed();
  TrainConfig c = profile == Profile::desk ? desk_train_config(arch, s) : default_train_config(arch, s);
  if (base_width) c.base_width = *base_width;
  if (levels) c.levels = *levels;
  if (discriminator_levels) c.discriminator_levels = *discriminator_levels;
  if (epochs) {
    c.optimizer.epochs = *epochs;
    c.discriminator_optimizer.epochs = *epochs;
  }
  if (batch_size) {
    c.optimizer.batch_size = *batch_size;
    c.discriminator_optimizer.batch_size = *batch_size;
  }
  if (lr) c.optimizer.lr = *lr;
  if (disc_lr) c.discriminator_optimizer.lr = *disc_lr;
  if (momentum) c.optimizer.momentum = *momentum;
  if (weight_decay) c.optimizer.weight_decay = *weight_decay;
  if (lambda_seg) c.lambda_seg = *lambda_seg;
  c.validate();
  return c;
}

PhantomConfig ExperimentConfig::phantom_layout(DatasetId id) const {
  const bool desk = profile == Profile::desk;
  DatasetDescriptor base;
  int count = 0;
  switch (id) {
    case DatasetId::d1: base = d1_descriptor(); break;
    case DatasetId::d2: base = d2_descriptor(); break;
    case DatasetId::promise_like: base = promise_like_descriptor(); break;
    case DatasetId::phantom: throw ConfigError("phantom layouts exist for d1, d2 and promise_like");
  }
  count = id == DatasetId::promise_like && desk ? 8 : base.patient_count;
  int per_patient = base.slices_per_patient;
  if (id != DatasetId::promise_like) per_patient = slices.value_or(desk ? 12 : per_patient);
  return phantom_config(id, require_seed(), patients.value_or(count), per_patient,
                        divisor.value_or(desk ? 4 : 1));
}

}  // namespace zseg
