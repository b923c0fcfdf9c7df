#include "ssr/run_config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace ssr {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (is.fail() || !(is >> std::ws).eof())
    throw std::runtime_error("config: bad value '" + value + "' for key '" + key + "'");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw std::runtime_error("config: empty list for key '" + key + "'");
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Canonical key order and per-key set/get, shared by parse and serialize.
struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"threads", [](RunConfig& c, const std::string& v) { c.threads = parse_number<int>("threads", v); },
       [](const RunConfig& c) { return std::to_string(c.threads); }},
      {"window", [](RunConfig& c, const std::string& v) { c.window = parse_number<int>("window", v); },
       [](const RunConfig& c) { return std::to_string(c.window); }},
      {"encoder.channels",
       [](RunConfig& c, const std::string& v) { c.encoder_channels = parse_number<Index>("encoder.channels", v); },
       [](const RunConfig& c) { return std::to_string(c.encoder_channels); }},
      {"encoder.blocks",
       [](RunConfig& c, const std::string& v) { c.encoder_blocks = parse_number<Index>("encoder.blocks", v); },
       [](const RunConfig& c) { return std::to_string(c.encoder_blocks); }},
      {"decoder.hidden",
       [](RunConfig& c, const std::string& v) { c.decoder_hidden = parse_number<Index>("decoder.hidden", v); },
       [](const RunConfig& c) { return std::to_string(c.decoder_hidden); }},
      {"decoder.layers",
       [](RunConfig& c, const std::string& v) { c.decoder_layers = parse_number<Index>("decoder.layers", v); },
       [](const RunConfig& c) { return std::to_string(c.decoder_layers); }},
      {"train.learning_rate",
       [](RunConfig& c, const std::string& v) { c.learning_rate = parse_number<double>("train.learning_rate", v); },
       [](const RunConfig& c) { return format_double(c.learning_rate); }},
      {"train.batch_size",
       [](RunConfig& c, const std::string& v) { c.batch_size = parse_number<int>("train.batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"train.epochs",
       [](RunConfig& c, const std::string& v) { c.epochs = parse_number<long>("train.epochs", v); },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},
      {"train.steps_per_epoch",
       [](RunConfig& c, const std::string& v) { c.steps_per_epoch = parse_number<long>("train.steps_per_epoch", v); },
       [](const RunConfig& c) { return std::to_string(c.steps_per_epoch); }},
      {"train.k_set",
       [](RunConfig& c, const std::string& v) { c.k_set = parse_int_list("train.k_set", v); },
       [](const RunConfig& c) { return format_int_list(c.k_set); }},
      {"train.patch_in_plane",
       [](RunConfig& c, const std::string& v) { c.patch_in_plane = parse_number<Index>("train.patch_in_plane", v); },
       [](const RunConfig& c) { return std::to_string(c.patch_in_plane); }},
      {"train.patch_lr_depth",
       [](RunConfig& c, const std::string& v) { c.patch_lr_depth = parse_number<Index>("train.patch_lr_depth", v); },
       [](const RunConfig& c) { return std::to_string(c.patch_lr_depth); }},
      {"train.max_pairs_per_patch",
       [](RunConfig& c, const std::string& v) { c.max_pairs_per_patch = parse_number<Index>("train.max_pairs_per_patch", v); },
       [](const RunConfig& c) { return std::to_string(c.max_pairs_per_patch); }},
      {"train.adam_beta1",
       [](RunConfig& c, const std::string& v) { c.adam_beta1 = parse_number<double>("train.adam_beta1", v); },
       [](const RunConfig& c) { return format_double(c.adam_beta1); }},
      {"train.adam_beta2",
       [](RunConfig& c, const std::string& v) { c.adam_beta2 = parse_number<double>("train.adam_beta2", v); },
       [](const RunConfig& c) { return format_double(c.adam_beta2); }},
      {"train.adam_epsilon",
       [](RunConfig& c, const std::string& v) { c.adam_epsilon = parse_number<double>("train.adam_epsilon", v); },
       [](const RunConfig& c) { return format_double(c.adam_epsilon); }},
      {"train.precision",
       [](RunConfig& c, const std::string& v) {
         if (v != "double" && v != "float")
           throw std::runtime_error("config: train.precision must be 'double' or 'float'");
         c.precision = v;
       },
       [](const RunConfig& c) { return c.precision; }},
      {"train.log", [](RunConfig& c, const std::string& v) { c.train_log = v; },
       [](const RunConfig& c) { return c.train_log; }},
      {"data.dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
       [](const RunConfig& c) { return c.data_dir; }},
  };
  return specs;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(line_no) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const auto& spec : key_specs()) {
      if (spec.name == key) {
        spec.set(cfg, value);
        known = true;
        break;
      }
    }
    if (!known) throw std::runtime_error("config: unknown key '" + key + "'");
  }
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& spec : key_specs()) os << spec.name << " = " << spec.get(cfg) << '\n';
  return os.str();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace ssr
