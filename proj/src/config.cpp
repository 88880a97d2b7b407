#include "srpc/config.hpp"

#include <charconv>
#include <sstream>

#include "srpc/errors.hpp"
#include "srpc/text.hpp"

namespace srpc {

namespace {

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == '#' && !quoted) return line.substr(0, k);
  }
  return line;
}

std::vector<std::string> array_items(const std::string& key, const std::string& raw) {
  std::string_view v = trim(raw);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ConfigError(key + " must be an array");
  v = trim(v.substr(1, v.size() - 2));
  std::vector<std::string> out;
  if (v.empty()) return out;
  for (const auto& item : split(v, ',')) out.emplace_back(unquote(trim(item)));
  return out;
}

template <class T>
T parse_number(const std::string& key, std::string_view s) {
  T v{};
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("config key " + key + ": '" + std::string(s) + "' is not a valid number");
  return v;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body(trim(strip_comment(line)));
    if (body.empty()) continue;
    if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string::npos) {
      section = std::string(trim(std::string_view(body).substr(1, body.size() - 2)));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string name(trim(std::string_view(body).substr(0, eq)));
    const std::string value(trim(std::string_view(body).substr(eq + 1)));
    if (name.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    const std::string key = section.empty() ? name : section + "." + name;
    if (cfg.values_.count(key)) throw ConfigError("config key " + key + " given twice");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse(read_text_file(path));
}

std::optional<std::string> Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return std::string(unquote(it->second));
}

std::optional<long> Config::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<long>(key, *s);
}

std::optional<double> Config::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<double>(key, *s);
}

std::optional<bool> Config::get_bool(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1") return true;
  if (*s == "false" || *s == "0") return false;
  throw ConfigError("config key " + key + " must be true or false");
}

std::optional<std::vector<double>> Config::get_doubles(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  std::vector<double> out;
  for (const auto& item : array_items(key, it->second)) out.push_back(parse_number<double>(key, item));
  return out;
}

std::optional<std::vector<long>> Config::get_ints(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  std::vector<long> out;
  for (const auto& item : array_items(key, it->second)) out.push_back(parse_number<long>(key, item));
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  return array_items(key, it->second);
}

void Config::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_)
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
}

Hyperparameters hyperparameters_from(const Config& cfg, Hyperparameters h) {
  const std::string sec = "prior.";
  if (auto v = cfg.get_int(sec + "K0")) h.K0 = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "Ks")) h.Ks = static_cast<int>(*v);
  if (auto v = cfg.get_ints(sec + "local_k")) h.local_k.assign(v->begin(), v->end());
  if (auto v = cfg.get_double(sec + "alpha0")) h.alpha0 = *v;
  if (auto v = cfg.get_double(sec + "alpha_s")) h.alpha_s = *v;
  if (auto v = cfg.get_double(sec + "eta")) h.eta = *v;
  if (auto v = cfg.get_double(sec + "a_beta")) h.a_beta = *v;
  if (auto v = cfg.get_double(sec + "b_beta")) h.b_beta = *v;
  if (auto v = cfg.get_double(sec + "a_sigma")) h.a_sigma = *v;
  if (auto v = cfg.get_double(sec + "b_sigma")) h.b_sigma = *v;
  if (auto v = cfg.get_doubles(sec + "mu0")) h.mu0 = *v;
  if (auto v = cfg.get_doubles(sec + "sigma0")) h.sigma0 = *v;
  return h;
}

ChainConfig chain_config_from(const Config& cfg, ChainConfig c) {
  const std::string sec = "chain.";
  if (auto v = cfg.get_int(sec + "iters")) c.n_iter = *v;
  if (auto v = cfg.get_int(sec + "burn")) c.burn_in = *v;
  if (auto v = cfg.get_int(sec + "thin")) c.thin = *v;
  if (auto v = cfg.get_int(sec + "seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.get_string(sec + "coding")) c.coding = coding_from_string(*v);
  if (auto v = cfg.get_bool(sec + "keep_latent")) c.keep_latent = *v;
  if (auto v = cfg.get_int(sec + "global_warmup")) c.global_warmup = *v;
  if (auto v = cfg.get_int(sec + "progress_every")) c.progress_every = *v;
  return c;
}

Schema schema_from(const Config& cfg, Schema s) {
  const std::string sec = "data.";
  if (auto v = cfg.get_string(sec + "id_column")) s.id_column = *v;
  if (auto v = cfg.get_string(sec + "subpop_column")) s.subpop_column = *v;
  if (auto v = cfg.get_string(sec + "outcome_column")) s.outcome_column = *v;
  if (auto v = cfg.get_string(sec + "exposure_prefix")) s.exposure_prefix = *v;
  if (auto v = cfg.get_string(sec + "demographic_prefix")) s.demographic_prefix = *v;
  if (cfg.has(sec + "exposures")) s.exposure_columns = cfg.get_strings(sec + "exposures");
  if (cfg.has(sec + "demographics")) s.demographic_columns = cfg.get_strings(sec + "demographics");
  if (auto v = cfg.get_ints(sec + "levels")) s.levels.assign(v->begin(), v->end());
  return s;
}

LoadOptions load_options_from(const Config& cfg) {
  LoadOptions o;
  if (auto v = cfg.get_bool("data.normalize_demographics")) o.normalize_demographics = *v;
  return o;
}

}  // namespace srpc
