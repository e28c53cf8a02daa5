#include "plcml/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace plcml {
namespace {

using nlohmann::json;

struct Binding {
  std::function<json()> get;
  std::function<std::string(const json&)> set;  // empty string on success
};

using BindingMap = std::map<std::string, Binding>;

bool nonneg_int(const json& j) {
  return j.is_number_unsigned() ||
         (j.is_number_integer() && j.get<long long>() >= 0);
}

void bind_size(BindingMap& m, const std::string& path, std::size_t& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!nonneg_int(j)) return "expected a non-negative integer";
                      ref = j.get<std::size_t>();
                      return {};
                    }};
}

void bind_u64(BindingMap& m, const std::string& path, std::uint64_t& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!nonneg_int(j)) return "expected a non-negative integer";
                      ref = j.get<std::uint64_t>();
                      return {};
                    }};
}

void bind_int(BindingMap& m, const std::string& path, int& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!j.is_number_integer() && !j.is_number_unsigned())
                        return "expected an integer";
                      ref = j.get<int>();
                      return {};
                    }};
}

void bind_double(BindingMap& m, const std::string& path, double& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!j.is_number()) return "expected a number";
                      ref = j.get<double>();
                      return {};
                    }};
}

void bind_bool(BindingMap& m, const std::string& path, bool& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!j.is_boolean()) return "expected true or false";
                      ref = j.get<bool>();
                      return {};
                    }};
}

void bind_string(BindingMap& m, const std::string& path, std::string& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!j.is_string()) return "expected a string";
                      ref = j.get<std::string>();
                      return {};
                    }};
}

void bind_vec_double(BindingMap& m, const std::string& path, std::vector<double>& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!j.is_array()) return "expected an array of numbers";
                      for (const auto& e : j)
                        if (!e.is_number()) return "expected an array of numbers";
                      ref = j.get<std::vector<double>>();
                      return {};
                    }};
}

void bind_vec_size(BindingMap& m, const std::string& path,
                   std::vector<std::size_t>& ref) {
  m[path] = Binding{[&ref] { return json(ref); },
                    [&ref](const json& j) -> std::string {
                      if (!j.is_array())
                        return "expected an array of non-negative integers";
                      for (const auto& e : j)
                        if (!nonneg_int(e))
                          return "expected an array of non-negative integers";
                      ref = j.get<std::vector<std::size_t>>();
                      return {};
                    }};
}

template <class Enum>
void bind_enum(BindingMap& m, const std::string& path, Enum& ref,
               std::vector<std::pair<std::string, Enum>> names) {
  m[path] = Binding{
      [&ref, names] {
        for (const auto& [text, value] : names)
          if (value == ref) return json(text);
        return json("?");
      },
      [&ref, names](const json& j) -> std::string {
        if (j.is_string())
          for (const auto& [text, value] : names)
            if (j.get<std::string>() == text) {
              ref = value;
              return {};
            }
        std::string msg = "expected one of:";
        for (const auto& [text, value] : names) msg += " " + text;
        return msg;
      }};
}

void bind_multipath(BindingMap& m, const std::string& prefix, MultipathConfig& mp) {
  bind_size(m, prefix + ".min_paths", mp.min_paths);
  bind_size(m, prefix + ".max_paths", mp.max_paths);
  bind_double(m, prefix + ".a0", mp.a0);
  bind_double(m, prefix + ".a1", mp.a1);
  bind_double(m, prefix + ".k", mp.k);
  bind_double(m, prefix + ".v", mp.v);
  bind_double(m, prefix + ".first_len_mean", mp.first_len_mean);
  bind_double(m, prefix + ".first_len_std", mp.first_len_std);
  bind_double(m, prefix + ".first_len_min", mp.first_len_min);
  bind_double(m, prefix + ".first_len_max", mp.first_len_max);
  bind_double(m, prefix + ".extra_len_min", mp.extra_len_min);
  bind_double(m, prefix + ".extra_len_max", mp.extra_len_max);
  bind_double(m, prefix + ".first_gain_min", mp.first_gain_min);
  bind_double(m, prefix + ".first_gain_max", mp.first_gain_max);
  bind_double(m, prefix + ".gain_decay_min", mp.gain_decay_min);
  bind_double(m, prefix + ".gain_decay_max", mp.gain_decay_max);
  bind_double(m, prefix + ".db_floor", mp.db_floor);
  bind_double(m, prefix + ".db_ceil", mp.db_ceil);
  bind_double(m, prefix + ".band_lo", mp.band_lo);
  bind_double(m, prefix + ".band_hi", mp.band_hi);
  bind_size(m, prefix + ".check_bins", mp.check_bins);
  bind_size(m, prefix + ".max_rejects", mp.max_rejects);
}

BindingMap make_bindings(ExperimentConfig& cfg) {
  BindingMap m;

  bind_u64(m, "global.seed", cfg.global.seed);
  bind_string(m, "global.output_dir", cfg.global.output_dir);
  bind_int(m, "global.threads", cfg.global.threads);

  bind_size(m, "channel.n", cfg.channel.n);
  bind_multipath(m, "channel.multipath", cfg.channel.multipath);

  bind_size(m, "noise-cluster.slots_per_class", cfg.noise_cluster.slots_per_class);
  bind_size(m, "noise-cluster.slot_len", cfg.noise_cluster.slot_len);
  bind_double(m, "noise-cluster.sample_rate", cfg.noise_cluster.sample_rate);
  bind_size(m, "noise-cluster.som_epochs", cfg.noise_cluster.som_epochs);
  bind_size(m, "noise-cluster.burg_order", cfg.noise_cluster.burg_order);
  bind_size(m, "noise-cluster.apen_m", cfg.noise_cluster.apen_m);
  bind_double(m, "noise-cluster.apen_r_factor", cfg.noise_cluster.apen_r_factor);

  bind_size(m, "gan.corpus_n", cfg.gan.corpus_n);
  bind_size(m, "gan.eval_samples", cfg.gan.eval_samples);
  bind_size(m, "gan.latent_dim", cfg.gan.gan.latent_dim);
  bind_vec_size(m, "gan.generator_hidden", cfg.gan.gan.generator_hidden);
  bind_vec_size(m, "gan.discriminator_hidden", cfg.gan.gan.discriminator_hidden);
  bind_size(m, "gan.epochs", cfg.gan.gan.epochs);
  bind_size(m, "gan.batch_size", cfg.gan.gan.batch_size);
  bind_size(m, "gan.critic_steps", cfg.gan.gan.critic_steps);
  bind_double(m, "gan.lr_generator", cfg.gan.gan.lr_generator);
  bind_double(m, "gan.lr_discriminator", cfg.gan.gan.lr_discriminator);

  bind_size(m, "ae-ser.m", cfg.ae_ser.ae.m);
  bind_size(m, "ae-ser.n", cfg.ae_ser.ae.n);
  bind_vec_size(m, "ae-ser.encoder_hidden", cfg.ae_ser.ae.encoder_hidden);
  bind_vec_size(m, "ae-ser.decoder_hidden", cfg.ae_ser.ae.decoder_hidden);
  bind_size(m, "ae-ser.fir_taps", cfg.ae_ser.ae.fir_taps);
  bind_enum<PowerRule>(m, "ae-ser.rule", cfg.ae_ser.ae.rule,
                       {{"avg_power", PowerRule::AvgPower},
                        {"per_symbol_energy", PowerRule::PerSymbolEnergy}});
  bind_double(m, "ae-ser.train_ebn0_db", cfg.ae_ser.ae.train_ebn0_db);
  bind_size(m, "ae-ser.epochs", cfg.ae_ser.ae.epochs);
  bind_size(m, "ae-ser.steps_per_epoch", cfg.ae_ser.ae.steps_per_epoch);
  bind_size(m, "ae-ser.batch_size", cfg.ae_ser.ae.batch_size);
  bind_double(m, "ae-ser.learning_rate", cfg.ae_ser.ae.learning_rate);
  bind_vec_double(m, "ae-ser.ebn0_db", cfg.ae_ser.ebn0_db);
  bind_size(m, "ae-ser.trials", cfg.ae_ser.trials);
  bind_bool(m, "ae-ser.multipath_channel", cfg.ae_ser.multipath_channel);

  bind_size(m, "route.train_topologies", cfg.route.train_topologies);
  bind_size(m, "route.node_lo", cfg.route.node_lo);
  bind_size(m, "route.node_hi", cfg.route.node_hi);
  bind_size(m, "route.test_topologies", cfg.route.test_topologies);
  bind_size(m, "route.oor_topologies", cfg.route.oor_topologies);
  bind_size(m, "route.oor_small_lo", cfg.route.oor_small_lo);
  bind_size(m, "route.oor_small_hi", cfg.route.oor_small_hi);
  bind_size(m, "route.oor_large_lo", cfg.route.oor_large_lo);
  bind_size(m, "route.oor_large_hi", cfg.route.oor_large_hi);
  bind_double(m, "route.density_lo", cfg.route.gen.density_lo);
  bind_double(m, "route.density_hi", cfg.route.gen.density_hi);
  bind_double(m, "route.area_side_lo", cfg.route.gen.area_side_lo);
  bind_double(m, "route.area_side_hi", cfg.route.gen.area_side_hi);
  bind_double(m, "route.min_capacity", cfg.route.gen.min_capacity);
  bind_double(m, "route.tx_psd", cfg.route.gen.tx_psd);
  bind_double(m, "route.noise_psd", cfg.route.gen.noise_psd);
  bind_size(m, "route.problems_per_topology", cfg.route.gen.problems_per_topology);
  bind_vec_size(m, "route.hidden", cfg.route.train.hidden);
  bind_double(m, "route.dropout", cfg.route.train.dropout);
  bind_double(m, "route.learning_rate", cfg.route.train.learning_rate);
  bind_size(m, "route.epochs", cfg.route.train.epochs);
  bind_size(m, "route.batch_size", cfg.route.train.batch_size);
  bind_size(m, "route.surface_density_bins", cfg.route.surface_density_bins);
  bind_size(m, "route.surface_distance_bins", cfg.route.surface_distance_bins);

  bind_size(m, "diagnose.n_nodes", cfg.diagnose.diag.n_nodes);
  bind_double(m, "diagnose.avg_edge_len", cfg.diagnose.diag.avg_edge_len);
  bind_size(m, "diagnose.n_realizations", cfg.diagnose.diag.n_realizations);
  bind_enum<DiagSignal>(m, "diagnose.signal", cfg.diagnose.diag.signal,
                        {{"yin", DiagSignal::Yin},
                         {"rho", DiagSignal::RhoIn},
                         {"h", DiagSignal::H}});
  bind_double(m, "diagnose.band_lo", cfg.diagnose.diag.band_lo);
  bind_double(m, "diagnose.band_hi", cfg.diagnose.diag.band_hi);
  bind_double(m, "diagnose.band_spacing", cfg.diagnose.diag.band_spacing);
  bind_double(m, "diagnose.nominal_load", cfg.diagnose.diag.nominal_load);
  bind_double(m, "diagnose.rho_z0", cfg.diagnose.diag.rho_z0);
  bind_double(m, "diagnose.jitter_lo", cfg.diagnose.diag.jitter_lo);
  bind_double(m, "diagnose.jitter_hi", cfg.diagnose.diag.jitter_hi);
  bind_double(m, "diagnose.change_lo", cfg.diagnose.diag.change_lo);
  bind_double(m, "diagnose.change_hi", cfg.diagnose.diag.change_hi);
  bind_double(m, "diagnose.change_guard", cfg.diagnose.diag.change_guard);
  bind_double(m, "diagnose.shunt_lo", cfg.diagnose.diag.shunt_lo);
  bind_double(m, "diagnose.shunt_hi", cfg.diagnose.diag.shunt_hi);
  bind_double(m, "diagnose.fault_factor_lo", cfg.diagnose.diag.fault_factor_lo);
  bind_double(m, "diagnose.fault_factor_hi", cfg.diagnose.diag.fault_factor_hi);
  bind_enum<DiagClassifier>(m, "diagnose.classifier", cfg.diagnose.train.kind,
                            {{"mlp", DiagClassifier::Mlp100},
                             {"svm", DiagClassifier::SvmOvr},
                             {"knn", DiagClassifier::Knn}});
  bind_size(m, "diagnose.hidden", cfg.diagnose.train.hidden);
  bind_size(m, "diagnose.epochs", cfg.diagnose.train.epochs);
  bind_size(m, "diagnose.batch_size", cfg.diagnose.train.batch_size);
  bind_double(m, "diagnose.learning_rate", cfg.diagnose.train.learning_rate);
  bind_double(m, "diagnose.train_fraction", cfg.diagnose.train.train_fraction);
  bind_size(m, "diagnose.svm_subsample", cfg.diagnose.train.svm_subsample);
  bind_double(m, "diagnose.svm_c", cfg.diagnose.train.svm_c);
  bind_size(m, "diagnose.knn_subsample", cfg.diagnose.train.knn_subsample);
  bind_size(m, "diagnose.knn_k", cfg.diagnose.train.knn_k);
  bind_size(m, "diagnose.n_seeds", cfg.diagnose.n_seeds);

  return m;
}

void flatten(const json& node, const std::string& prefix,
             std::vector<std::pair<std::string, const json*>>& leaves) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items())
      flatten(value, prefix.empty() ? key : prefix + "." + key, leaves);
  } else {
    leaves.emplace_back(prefix, &node);
  }
}

}  // namespace

void merge_config_json(ExperimentConfig& cfg, const std::string& json_text,
                       std::vector<std::string>& errors) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) {
    errors.push_back("config: not valid JSON");
    return;
  }
  if (!doc.is_object()) {
    errors.push_back("config: top level must be an object");
    return;
  }
  const BindingMap bindings = make_bindings(cfg);
  std::vector<std::pair<std::string, const json*>> leaves;
  flatten(doc, "", leaves);
  for (const auto& [path, value] : leaves) {
    const auto it = bindings.find(path);
    if (it == bindings.end()) {
      errors.push_back(path + ": unknown key");
      continue;
    }
    const std::string msg = it->second.set(*value);
    if (!msg.empty()) errors.push_back(path + ": " + msg);
  }
}

void merge_config_file(ExperimentConfig& cfg, const std::string& path,
                       std::vector<std::string>& errors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    errors.push_back("config: cannot read file " + path);
    return;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  merge_config_json(cfg, ss.str(), errors);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment,
                    std::vector<std::string>& errors) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back(assignment + ": override must look like path=value");
    return;
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const BindingMap bindings = make_bindings(cfg);
  const auto it = bindings.find(path);
  if (it == bindings.end()) {
    errors.push_back(path + ": unknown key");
    return;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = json(text);  // bare strings stay strings
  const std::string msg = it->second.set(value);
  if (!msg.empty()) errors.push_back(path + ": " + msg);
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  auto check = [&out](bool ok, const std::string& path, const std::string& msg) {
    if (!ok) out.push_back(path + ": " + msg);
  };

  check(cfg.global.threads >= 1, "global.threads", "must be at least 1");
  check(!cfg.global.output_dir.empty(), "global.output_dir", "must not be empty");

  check(cfg.channel.n >= 1, "channel.n", "must be at least 1");
  const MultipathConfig& mp = cfg.channel.multipath;
  check(mp.min_paths >= 1, "channel.multipath.min_paths", "must be at least 1");
  check(mp.max_paths >= mp.min_paths, "channel.multipath.max_paths",
        "must be at least min_paths");
  check(mp.band_lo > 0.0 && mp.band_hi > mp.band_lo, "channel.multipath.band_hi",
        "band must satisfy 0 < band_lo < band_hi");
  check(mp.check_bins >= 2, "channel.multipath.check_bins", "must be at least 2");
  check(mp.db_ceil > mp.db_floor, "channel.multipath.db_ceil",
        "must exceed db_floor");
  check(mp.v > 0.0, "channel.multipath.v", "must be positive");
  check(mp.first_len_min > 0.0 && mp.first_len_max >= mp.first_len_min,
        "channel.multipath.first_len_max", "lengths must satisfy 0 < min <= max");
  check(mp.extra_len_min > 0.0 && mp.extra_len_max >= mp.extra_len_min,
        "channel.multipath.extra_len_max", "lengths must satisfy 0 < min <= max");
  check(mp.first_gain_min > 0.0 && mp.first_gain_max >= mp.first_gain_min,
        "channel.multipath.first_gain_max", "gains must satisfy 0 < min <= max");
  check(mp.gain_decay_min > 0.0 && mp.gain_decay_max >= mp.gain_decay_min,
        "channel.multipath.gain_decay_max", "decays must satisfy 0 < min <= max");
  check(mp.max_rejects >= 1, "channel.multipath.max_rejects", "must be at least 1");

  const NoiseClusterConfig& nc = cfg.noise_cluster;
  check(nc.slots_per_class >= 2, "noise-cluster.slots_per_class",
        "must be at least 2");
  check(nc.slot_len >= 256, "noise-cluster.slot_len", "must be at least 256");
  check(nc.sample_rate > 0.0, "noise-cluster.sample_rate", "must be positive");
  check(nc.som_epochs >= 1, "noise-cluster.som_epochs", "must be at least 1");
  check(nc.burg_order >= 1 && nc.burg_order < nc.slot_len, "noise-cluster.burg_order",
        "must be in [1, slot_len)");
  check(nc.apen_m >= 1, "noise-cluster.apen_m", "must be at least 1");
  check(nc.apen_r_factor > 0.0, "noise-cluster.apen_r_factor", "must be positive");

  check(cfg.gan.corpus_n >= 2, "gan.corpus_n", "must be at least 2");
  check(cfg.gan.eval_samples >= 1, "gan.eval_samples", "must be at least 1");
  const GanConfig& g = cfg.gan.gan;
  check(g.latent_dim >= 1, "gan.latent_dim", "must be at least 1");
  auto check_hidden = [&check](const std::vector<std::size_t>& h,
                               const std::string& path) {
    check(!h.empty(), path, "must not be empty");
    for (std::size_t w : h)
      if (w == 0) {
        check(false, path, "layer widths must be positive");
        break;
      }
  };
  check_hidden(g.generator_hidden, "gan.generator_hidden");
  check_hidden(g.discriminator_hidden, "gan.discriminator_hidden");
  check(g.epochs >= 1, "gan.epochs", "must be at least 1");
  check(g.batch_size >= 1, "gan.batch_size", "must be at least 1");
  check(g.critic_steps >= 1, "gan.critic_steps", "must be at least 1");
  check(g.lr_generator > 0.0, "gan.lr_generator", "must be positive");
  check(g.lr_discriminator > 0.0, "gan.lr_discriminator", "must be positive");

  const AeSerCliConfig& ae = cfg.ae_ser;
  check(ae.ae.m >= 2 && (ae.ae.m & (ae.ae.m - 1)) == 0, "ae-ser.m",
        "must be a power of two, at least 2");
  check(ae.ae.n >= 1, "ae-ser.n", "must be at least 1");
  check_hidden(ae.ae.encoder_hidden, "ae-ser.encoder_hidden");
  check_hidden(ae.ae.decoder_hidden, "ae-ser.decoder_hidden");
  check(ae.ae.epochs >= 1, "ae-ser.epochs", "must be at least 1");
  check(ae.ae.steps_per_epoch >= 1, "ae-ser.steps_per_epoch", "must be at least 1");
  check(ae.ae.batch_size >= 1, "ae-ser.batch_size", "must be at least 1");
  check(ae.ae.learning_rate > 0.0, "ae-ser.learning_rate", "must be positive");
  check(!ae.ebn0_db.empty(), "ae-ser.ebn0_db", "must not be empty");
  check(ae.trials >= 1, "ae-ser.trials", "must be at least 1");

  const RouteCliConfig& rt = cfg.route;
  check(rt.train_topologies >= 1, "route.train_topologies", "must be at least 1");
  check(rt.test_topologies >= 1, "route.test_topologies", "must be at least 1");
  check(rt.oor_topologies >= 1, "route.oor_topologies", "must be at least 1");
  check(rt.node_lo >= 2 && rt.node_hi >= rt.node_lo, "route.node_hi",
        "node range must satisfy 2 <= lo <= hi");
  check(rt.oor_small_lo >= 2 && rt.oor_small_hi >= rt.oor_small_lo,
        "route.oor_small_hi", "range must satisfy 2 <= lo <= hi");
  check(rt.oor_large_lo >= 2 && rt.oor_large_hi >= rt.oor_large_lo,
        "route.oor_large_hi", "range must satisfy 2 <= lo <= hi");
  if (rt.gen.area_side_hi > 0.0)
    check(rt.gen.area_side_lo > 0.0 && rt.gen.area_side_hi >= rt.gen.area_side_lo,
          "route.area_side_hi", "area range must satisfy 0 < lo <= hi");
  else
    check(rt.gen.density_lo > 0.0 && rt.gen.density_hi >= rt.gen.density_lo,
          "route.density_hi", "density range must satisfy 0 < lo <= hi");
  check(rt.gen.min_capacity > 0.0, "route.min_capacity", "must be positive");
  check(rt.gen.tx_psd > 0.0, "route.tx_psd", "must be positive");
  check(rt.gen.noise_psd > 0.0, "route.noise_psd", "must be positive");
  check(rt.gen.problems_per_topology >= 1, "route.problems_per_topology",
        "must be at least 1");
  check_hidden(rt.train.hidden, "route.hidden");
  check(rt.train.dropout >= 0.0 && rt.train.dropout < 1.0, "route.dropout",
        "must be in [0, 1)");
  check(rt.train.learning_rate > 0.0, "route.learning_rate", "must be positive");
  check(rt.train.epochs >= 1, "route.epochs", "must be at least 1");
  check(rt.train.batch_size >= 1, "route.batch_size", "must be at least 1");
  check(rt.surface_density_bins >= 1, "route.surface_density_bins",
        "must be at least 1");
  check(rt.surface_distance_bins >= 1, "route.surface_distance_bins",
        "must be at least 1");

  const DiagConfig& d = cfg.diagnose.diag;
  check(d.n_nodes >= 3, "diagnose.n_nodes", "must be at least 3");
  check(d.avg_edge_len > 0.0, "diagnose.avg_edge_len", "must be positive");
  check(d.n_realizations >= 1, "diagnose.n_realizations", "must be at least 1");
  check(d.band_lo > 0.0 && d.band_hi > d.band_lo, "diagnose.band_hi",
        "band must satisfy 0 < lo < hi");
  check(d.band_spacing > 0.0, "diagnose.band_spacing", "must be positive");
  check(d.nominal_load > 0.0, "diagnose.nominal_load", "must be positive");
  check(d.rho_z0 > 0.0, "diagnose.rho_z0", "must be positive");
  check(d.jitter_lo > 0.0 && d.jitter_hi > d.jitter_lo, "diagnose.jitter_hi",
        "jitter band must satisfy 0 < lo < hi");
  check(d.change_lo > 0.0 && d.change_hi > d.change_lo, "diagnose.change_hi",
        "change band must satisfy 0 < lo < hi");
  check(d.change_guard >= 1.0, "diagnose.change_guard", "must be at least 1");
  check(d.change_lo < d.jitter_lo / d.change_guard &&
            d.change_hi > d.jitter_hi * d.change_guard,
        "diagnose.change_guard", "change band must extend beyond the guarded jitter band");
  check(d.change_lo < d.nominal_load / d.change_guard &&
            d.change_hi > d.nominal_load * d.change_guard,
        "diagnose.change_guard", "change band must extend beyond the guarded nominal load");
  check(d.shunt_lo > 0.0 && d.shunt_hi > d.shunt_lo, "diagnose.shunt_hi",
        "shunt band must satisfy 0 < lo < hi");
  check(d.fault_factor_lo > 1.0 && d.fault_factor_hi > d.fault_factor_lo,
        "diagnose.fault_factor_hi", "factors must satisfy 1 < lo < hi");
  const DiagTrainConfig& dt = cfg.diagnose.train;
  check(dt.hidden >= 1, "diagnose.hidden", "must be at least 1");
  check(dt.epochs >= 1, "diagnose.epochs", "must be at least 1");
  check(dt.batch_size >= 1, "diagnose.batch_size", "must be at least 1");
  check(dt.learning_rate > 0.0, "diagnose.learning_rate", "must be positive");
  check(dt.train_fraction > 0.0 && dt.train_fraction < 1.0,
        "diagnose.train_fraction", "must be in (0, 1)");
  check(dt.svm_subsample >= 2, "diagnose.svm_subsample", "must be at least 2");
  check(dt.svm_c > 0.0, "diagnose.svm_c", "must be positive");
  check(dt.knn_subsample >= 1, "diagnose.knn_subsample", "must be at least 1");
  check(dt.knn_k >= 1 && dt.knn_k % 2 == 1, "diagnose.knn_k", "must be odd");
  check(cfg.diagnose.n_seeds >= 1, "diagnose.n_seeds", "must be at least 1");

  return out;
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  // Bindings mutate through references; resolution only reads them.
  const BindingMap bindings = make_bindings(const_cast<ExperimentConfig&>(cfg));
  json root = json::object();
  for (const auto& [path, binding] : bindings) {
    std::string pointer = "/" + path;
    for (char& ch : pointer)
      if (ch == '.') ch = '/';
    root[json::json_pointer(pointer)] = binding.get();
  }
  return root.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = resolved_config_json(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace plcml
