#include "sefft/run_config.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include "sefft/binary_io.hpp"

namespace sefft {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError("bad value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean '" + text + "' for " + key);
}

}  // namespace

DilationSchedule parse_schedule(const std::string& raw) {
  const auto text = trim(raw);
  for (const char* preset : {"se-fftnet", "se-invfftnet"}) {
    const std::string name = preset;
    if (text.rfind(name, 0) != 0) continue;
    const auto rest = text.substr(name.size());
    if (!rest.empty() && rest.front() != ':') continue;
    int levels = 10, repeats = 3;
    if (!rest.empty()) {
      const auto colon = rest.find(':', 1);
      if (colon == std::string::npos) throw ConfigError("schedule preset must be name:levels:repeats");
      levels = parse_value<int>("schedule levels", rest.substr(1, colon - 1));
      repeats = parse_value<int>("schedule repeats", rest.substr(colon + 1));
    }
    return name == "se-fftnet" ? DilationSchedule::se_fftnet(levels, repeats)
                               : DilationSchedule::se_invfftnet(levels, repeats);
  }
  std::vector<Index> dilations;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) dilations.push_back(parse_value<Index>("schedule", trim(item)));
  return DilationSchedule(std::move(dilations));
}

std::string format_schedule(const DilationSchedule& schedule) {
  std::string out;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(schedule[i]);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "schedule") c.model.schedule = parse_schedule(value);
  else if (key == "channels") c.model.channels = parse_value<Index>(key, value);
  else if (key == "causal") c.model.causality = parse_bool(key, value) ? Causality::Causal : Causality::NonCausal;
  else if (key == "learning_rate") c.train.learning_rate = parse_value<double>(key, value);
  else if (key == "beta1") c.train.beta1 = parse_value<double>(key, value);
  else if (key == "beta2") c.train.beta2 = parse_value<double>(key, value);
  else if (key == "epsilon") c.train.epsilon = parse_value<double>(key, value);
  else if (key == "target_field") c.train.target_field = parse_value<Index>(key, value);
  else if (key == "batch_size") c.train.batch_size = parse_value<Index>(key, value);
  else if (key == "max_steps") c.train.max_steps = parse_value<std::uint64_t>(key, value);
  else if (key == "checkpoint_interval") c.train.checkpoint_interval = parse_value<std::uint64_t>(key, value);
  else if (key == "seed") c.train.seed = parse_value<std::uint64_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  for (const auto& [key, value] : parse_key_values(text)) apply_setting(config, key, value);
  config.model.validate();
  config.train.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return parse_run_config(binary::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "schedule = " << format_schedule(c.model.schedule) << '\n'
      << "channels = " << c.model.channels << '\n'
      << "causal = " << (c.model.causal() ? "true" : "false") << '\n'
      << "learning_rate = " << c.train.learning_rate << '\n'
      << "beta1 = " << c.train.beta1 << '\n'
      << "beta2 = " << c.train.beta2 << '\n'
      << "epsilon = " << c.train.epsilon << '\n'
      << "target_field = " << c.train.target_field << '\n'
      << "batch_size = " << c.train.batch_size << '\n'
      << "max_steps = " << c.train.max_steps << '\n'
      << "checkpoint_interval = " << c.train.checkpoint_interval << '\n'
      << "seed = " << c.train.seed << '\n';
  return out.str();
}

}  // namespace sefft
