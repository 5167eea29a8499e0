#include "encinit/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "csv_util.hpp"

namespace encinit {

namespace pt = boost::property_tree;

namespace {

// Reads every expected key from the tree and records which ones were consumed.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::string text(const std::string& key) {
    used_.insert(key);
    auto node = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!node) throw ConfigError("missing key '" + key + "'");
    return detail::trim(*node);
  }
  double real(const std::string& key) {
    try {
      return detail::parse_double(text(key), key);
    } catch (const IoError&) {
      throw ConfigError("key '" + key + "' is not a number");
    }
  }
  Index integer(const std::string& key) {
    try {
      return detail::parse_long(text(key), key);
    } catch (const IoError&) {
      throw ConfigError("key '" + key + "' is not an integer");
    }
  }
  std::uint64_t unsigned_integer(const std::string& key) {
    const Index v = integer(key);
    if (v < 0) throw ConfigError("key '" + key + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  std::vector<Index> integers(const std::string& key) {
    std::vector<Index> out;
    const std::string s = text(key);
    if (s.empty()) return out;
    for (const auto& item : detail::split(s, ',')) {
      try {
        out.push_back(detail::parse_long(detail::trim(item), key));
      } catch (const IoError&) {
        throw ConfigError("key '" + key + "' must be a comma separated integer list");
      }
    }
    return out;
  }
  std::vector<InitMethod> methods(const std::string& key) {
    std::vector<InitMethod> out;
    for (const auto& item : detail::split(text(key), ',')) out.push_back(parse_init_method(detail::trim(item)));
    return out;
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty()) throw ConfigError("key '" + section + "' must sit inside a [section]");
      for (const auto& [name, value] : body) {
        const std::string key = section + "." + name;
        if (!used_.count(key)) throw ConfigError("unknown key '" + key + "'");
      }
    }
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

std::string join(const std::vector<Index>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
  return s;
}

}  // namespace

MsdParams ExperimentConfig::baseline_params() const {
  MsdParams p = system;
  p.d1 = baseline_d1;
  return p;
}

void ExperimentConfig::sync() {
  data.seed = seed;
  train.n_a = n_a;
  train.n_b = n_b;
  train.seed = seed;
  pretrain.seed = seed;
  pretrain.hidden = encoder_hidden;
}

void ExperimentConfig::validate() const {
  system.validate();
  baseline_params().validate();
  data.validate();
  train.validate();
  if (n_a < 1 || n_b < 1) throw ConfigError("encoder lags n_a and n_b must be >= 1");
  if (pretrain.epochs < 0 || pretrain.batch_size < 1) throw ConfigError("invalid pretraining configuration");
  if (mc_runs < 1 || mc_workers < 1 || mc_methods.empty()) {
    throw ConfigError("montecarlo needs runs >= 1, workers >= 1 and at least one method");
  }
}

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  Reader r(tree);
  ExperimentConfig c;
  c.system.m1 = r.real("system.m1");
  c.system.m2 = r.real("system.m2");
  c.system.k1 = r.real("system.k1");
  c.system.k2 = r.real("system.k2");
  c.system.c1 = r.real("system.c1");
  c.system.c2 = r.real("system.c2");
  c.system.a2 = r.real("system.a2");
  c.system.d1 = r.real("system.d1");
  c.baseline_d1 = r.real("baseline.d1");

  c.data.ts = r.real("data.ts");
  c.data.ti = r.real("data.ti");
  c.data.n_freq = r.integer("data.n_freq");
  c.data.band_lo = r.real("data.band_lo");
  c.data.band_hi = r.real("data.band_hi");
  c.data.snr_db = r.real("data.snr_db");
  c.data.n_est = r.integer("data.n_est");
  c.data.n_val = r.integer("data.n_val");
  c.data.n_test = r.integer("data.n_test");
  c.data.transient_discard = r.integer("data.transient_discard");
  c.data.input_rms = r.real("data.input_rms");
  c.data.multisine_period = r.integer("data.multisine_period");

  c.seed = r.unsigned_integer("experiment.seed");

  c.n_a = r.integer("encoder.n_a");
  c.n_b = r.integer("encoder.n_b");
  c.encoder_hidden = r.integers("encoder.hidden");
  c.augmentation_hidden = r.integers("augmentation.hidden");

  c.train.T = r.integer("train.T");
  c.train.epochs = r.integer("train.epochs");
  c.train.batch_size = r.integer("train.batch_size");
  c.train.adam.lr = r.real("train.lr");
  c.train.adam.beta1 = r.real("train.beta1");
  c.train.adam.beta2 = r.real("train.beta2");
  c.train.adam.eps = r.real("train.eps");
  c.train.val_horizons = r.integers("train.val_horizons");
  c.train.val_sections = r.integer("train.val_sections");

  c.pretrain.epochs = r.integer("pretrain.epochs");
  c.pretrain.batch_size = r.integer("pretrain.batch_size");
  c.pretrain.adam.lr = r.real("pretrain.lr");

  c.mc_runs = r.integer("montecarlo.runs");
  c.mc_workers = r.integer("montecarlo.workers");
  c.mc_methods = r.methods("montecarlo.methods");

  r.reject_unknown();
  c.sync();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file '" + path + "'");
  return parse_config(is);
}

void write_config(const ExperimentConfig& c, std::ostream& os) {
  using detail::format_double;
  os << "[system]\n"
     << "m1 = " << format_double(c.system.m1) << "\n"
     << "m2 = " << format_double(c.system.m2) << "\n"
     << "k1 = " << format_double(c.system.k1) << "\n"
     << "k2 = " << format_double(c.system.k2) << "\n"
     << "c1 = " << format_double(c.system.c1) << "\n"
     << "c2 = " << format_double(c.system.c2) << "\n"
     << "a2 = " << format_double(c.system.a2) << "\n"
     << "d1 = " << format_double(c.system.d1) << "\n\n"
     << "[baseline]\n"
     << "d1 = " << format_double(c.baseline_d1) << "\n\n"
     << "[data]\n"
     << "ts = " << format_double(c.data.ts) << "\n"
     << "ti = " << format_double(c.data.ti) << "\n"
     << "n_freq = " << c.data.n_freq << "\n"
     << "band_lo = " << format_double(c.data.band_lo) << "\n"
     << "band_hi = " << format_double(c.data.band_hi) << "\n"
     << "snr_db = " << format_double(c.data.snr_db) << "\n"
     << "n_est = " << c.data.n_est << "\n"
     << "n_val = " << c.data.n_val << "\n"
     << "n_test = " << c.data.n_test << "\n"
     << "transient_discard = " << c.data.transient_discard << "\n"
     << "input_rms = " << format_double(c.data.input_rms) << "\n"
     << "multisine_period = " << c.data.multisine_period << "\n\n"
     << "[experiment]\n"
     << "seed = " << c.seed << "\n\n"
     << "[encoder]\n"
     << "n_a = " << c.n_a << "\n"
     << "n_b = " << c.n_b << "\n"
     << "hidden = " << join(c.encoder_hidden) << "\n\n"
     << "[augmentation]\n"
     << "hidden = " << join(c.augmentation_hidden) << "\n\n"
     << "[train]\n"
     << "T = " << c.train.T << "\n"
     << "epochs = " << c.train.epochs << "\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "lr = " << format_double(c.train.adam.lr) << "\n"
     << "beta1 = " << format_double(c.train.adam.beta1) << "\n"
     << "beta2 = " << format_double(c.train.adam.beta2) << "\n"
     << "eps = " << format_double(c.train.adam.eps) << "\n"
     << "val_horizons = " << join(c.train.val_horizons) << "\n"
     << "val_sections = " << c.train.val_sections << "\n\n"
     << "[pretrain]\n"
     << "epochs = " << c.pretrain.epochs << "\n"
     << "batch_size = " << c.pretrain.batch_size << "\n"
     << "lr = " << format_double(c.pretrain.adam.lr) << "\n\n"
     << "[montecarlo]\n"
     << "runs = " << c.mc_runs << "\n"
     << "workers = " << c.mc_workers << "\n"
     << "methods = ";
  for (std::size_t i = 0; i < c.mc_methods.size(); ++i) os << (i ? "," : "") << to_string(c.mc_methods[i]);
  os << "\n";
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  auto os = detail::open_out(path);
  write_config(cfg, os);
}

}  // namespace encinit
