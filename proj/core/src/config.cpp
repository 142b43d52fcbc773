#include "tst/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tst/errors.hpp"

namespace tst {

std::string to_string(PositionEncoding pe) {
  return pe == PositionEncoding::Learned1D ? "1d" : "none";
}

PositionEncoding parse_position_encoding(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1d" || s == "learned1d") return PositionEncoding::Learned1D;
  if (s == "none") return PositionEncoding::None;
  throw ConfigError("unknown position encoding '" + std::string(text) + "' (expected 1d or none)");
}

void TSTConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(series_length, "series_length");
  positive(num_subsequences, "num_subsequences");
  positive(dim, "dim");
  positive(dim_mlp, "dim_mlp");
  positive(key_dim, "key_dim");
  positive(num_heads, "num_heads");
  positive(depth, "depth");
  positive(num_classes, "num_classes");
  positive(lr_step, "lr_step");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  if (series_length % num_subsequences != 0)
    throw ConfigError("series length L=" + std::to_string(series_length) +
                      " is not divisible by the number of subsequences Ns=" + std::to_string(num_subsequences));
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw ConfigError("p_drop must lie in [0, 1), got " + std::to_string(p_drop));
  if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("lr_gamma must lie in (0, 1]");
}

bool TSTConfig::same_architecture(const TSTConfig& o) const {
  return series_length == o.series_length && num_subsequences == o.num_subsequences && dim == o.dim &&
         dim_mlp == o.dim_mlp && key_dim == o.key_dim && num_heads == o.num_heads && depth == o.depth &&
         position_encoding == o.position_encoding && num_classes == o.num_classes;
}

std::string config_to_json(const TSTConfig& c, int indent) {
  nlohmann::ordered_json j;
  j["series_length"] = c.series_length;
  j["num_subsequences"] = c.num_subsequences;
  j["dim"] = c.dim;
  j["dim_mlp"] = c.dim_mlp;
  j["key_dim"] = c.key_dim;
  j["num_heads"] = c.num_heads;
  j["depth"] = c.depth;
  j["p_drop"] = c.p_drop;
  j["position_encoding"] = to_string(c.position_encoding);
  j["num_classes"] = c.num_classes;
  j["initial_lr"] = c.initial_lr;
  j["lr_step"] = c.lr_step;
  j["lr_gamma"] = c.lr_gamma;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  return j.dump(indent);
}

TSTConfig config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TSTConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "series_length") c.series_length = v.get<std::size_t>();
      else if (key == "num_subsequences") c.num_subsequences = v.get<std::size_t>();
      else if (key == "dim") c.dim = v.get<std::size_t>();
      else if (key == "dim_mlp") c.dim_mlp = v.get<std::size_t>();
      else if (key == "key_dim") c.key_dim = v.get<std::size_t>();
      else if (key == "num_heads") c.num_heads = v.get<std::size_t>();
      else if (key == "depth") c.depth = v.get<std::size_t>();
      else if (key == "p_drop") c.p_drop = v.get<double>();
      else if (key == "position_encoding") c.position_encoding = parse_position_encoding(v.get<std::string>());
      else if (key == "num_classes") c.num_classes = v.get<std::size_t>();
      else if (key == "initial_lr") c.initial_lr = v.get<double>();
      else if (key == "lr_step") c.lr_step = v.get<std::size_t>();
      else if (key == "lr_gamma") c.lr_gamma = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
    }
  }
  return c;
}

TSTConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace tst
