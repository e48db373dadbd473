#include "con2da/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "con2da/errors.hpp"

namespace con2da {

namespace {

using nlohmann::ordered_json;
using Errors = std::vector<std::string>;

enum class Kind { number, integer, boolean, text, int_list, text_list };

struct KeySpec {
  std::string name;
  Kind kind;
  std::function<ordered_json(const ExperimentConfig&)> get;
  // Receives a value already checked against `kind`; semantic range checks happen in validate().
  std::function<void(ExperimentConfig&, const ordered_json&, Errors&)> set;
};

KeySpec num(std::string name, std::function<double&(ExperimentConfig&)> ref) {
  return {name, Kind::number, [ref](const ExperimentConfig& c) {
            return ordered_json(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref](ExperimentConfig& c, const ordered_json& v, Errors&) { ref(c) = v.get<double>(); }};
}

template <typename U>
KeySpec integer(std::string name, std::function<U&(ExperimentConfig&)> ref) {
  return {name, Kind::integer, [ref](const ExperimentConfig& c) {
            return ordered_json(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref, name](ExperimentConfig& c, const ordered_json& v, Errors& errors) {
            if (v.is_number_unsigned()) {
              ref(c) = static_cast<U>(v.get<std::uint64_t>());
            } else if (v.get<std::int64_t>() < 0) {
              errors.push_back(name + ": must be non-negative");
            } else {
              ref(c) = static_cast<U>(v.get<std::int64_t>());
            }
          }};
}

KeySpec boolean(std::string name, std::function<bool&(ExperimentConfig&)> ref) {
  return {name, Kind::boolean, [ref](const ExperimentConfig& c) {
            return ordered_json(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref](ExperimentConfig& c, const ordered_json& v, Errors&) { ref(c) = v.get<bool>(); }};
}

template <typename E>
KeySpec enumerated(std::string name, std::function<E&(ExperimentConfig&)> ref,
                   std::function<E(std::string_view)> parse) {
  return {name, Kind::text, [ref](const ExperimentConfig& c) {
            return ordered_json(std::string(to_string(ref(const_cast<ExperimentConfig&>(c)))));
          },
          [ref, parse, name](ExperimentConfig& c, const ordered_json& v, Errors& errors) {
            try {
              ref(c) = parse(v.get<std::string>());
            } catch (const ConfigError& e) {
              errors.push_back(name + ": " + e.what());
            }
          }};
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    t.push_back({"dataset_path", Kind::text,
                 [](const ExperimentConfig& c) {
                   return ordered_json(c.dataset_path ? c.dataset_path->string() : std::string());
                 },
                 [](ExperimentConfig& c, const ordered_json& v, Errors&) {
                   const auto s = v.get<std::string>();
                   if (s.empty()) {
                     c.dataset_path.reset();
                   } else {
                     c.dataset_path = s;
                   }
                 }});
    t.push_back(enumerated<Generator>("generator", [](ExperimentConfig& c) -> Generator& { return c.shift.generator; },
                                      parse_generator));
    t.push_back(integer<std::uint32_t>("num_classes", [](ExperimentConfig& c) -> std::uint32_t& {
      return c.shift.num_classes;
    }));
    t.push_back(integer<std::size_t>("samples_per_domain", [](ExperimentConfig& c) -> std::size_t& {
      return c.shift.samples_per_domain;
    }));
    t.push_back(enumerated<ShiftKind>("shift_kind", [](ExperimentConfig& c) -> ShiftKind& { return c.shift.shift_kind; },
                                      parse_shift_kind));
    t.push_back(num("shift_magnitude", [](ExperimentConfig& c) -> double& { return c.shift.shift_magnitude; }));
    t.push_back(integer<std::uint32_t>("image_channels", [](ExperimentConfig& c) -> std::uint32_t& {
      return c.shift.channels;
    }));
    t.push_back(integer<std::uint32_t>("image_height", [](ExperimentConfig& c) -> std::uint32_t& {
      return c.shift.height;
    }));
    t.push_back(integer<std::uint32_t>("image_width", [](ExperimentConfig& c) -> std::uint32_t& {
      return c.shift.width;
    }));
    t.push_back(enumerated<Objective>("method", [](ExperimentConfig& c) -> Objective& { return c.train.objective; },
                                      parse_objective));
    t.push_back(num("temperature", [](ExperimentConfig& c) -> double& { return c.train.temperature; }));
    t.push_back(num("threshold", [](ExperimentConfig& c) -> double& { return c.train.threshold; }));
    t.push_back(num("learning_rate", [](ExperimentConfig& c) -> double& { return c.train.learning_rate; }));
    t.push_back(num("beta1", [](ExperimentConfig& c) -> double& { return c.train.beta1; }));
    t.push_back(num("beta2", [](ExperimentConfig& c) -> double& { return c.train.beta2; }));
    t.push_back(integer<std::uint64_t>("total_iterations", [](ExperimentConfig& c) -> std::uint64_t& {
      return c.train.total_iterations;
    }));
    t.push_back(integer<std::size_t>("patience", [](ExperimentConfig& c) -> std::size_t& { return c.train.patience; }));
    t.push_back(integer<std::size_t>("shots", [](ExperimentConfig& c) -> std::size_t& { return c.train.shots; }));
    t.push_back(integer<std::size_t>("labeled_batch_size", [](ExperimentConfig& c) -> std::size_t& {
      return c.train.labeled_batch_size;
    }));
    t.push_back(integer<std::size_t>("unlabeled_batch_size", [](ExperimentConfig& c) -> std::size_t& {
      return c.train.unlabeled_batch_size;
    }));
    t.push_back(num("crop_scale_min", [](ExperimentConfig& c) -> double& { return c.train.augment.crop_scale_range[0]; }));
    t.push_back(num("crop_scale_max", [](ExperimentConfig& c) -> double& { return c.train.augment.crop_scale_range[1]; }));
    t.push_back(num("flip_probability", [](ExperimentConfig& c) -> double& { return c.train.augment.flip_probability; }));
    t.push_back(num("blur_sigma_min", [](ExperimentConfig& c) -> double& { return c.train.augment.blur_sigma_range[0]; }));
    t.push_back(num("blur_sigma_max", [](ExperimentConfig& c) -> double& { return c.train.augment.blur_sigma_range[1]; }));
    t.push_back(integer<int>("rand_augment_ops", [](ExperimentConfig& c) -> int& { return c.train.augment.rand_augment_ops; }));
    t.push_back(integer<int>("rand_augment_magnitude", [](ExperimentConfig& c) -> int& {
      return c.train.augment.rand_augment_magnitude;
    }));
    t.push_back({"strong_extras", Kind::text_list,
                 [](const ExperimentConfig& c) {
                   ordered_json a = ordered_json::array();
                   for (StrongExtra e : c.train.augment.strong_extras) a.push_back(std::string(to_string(e)));
                   return a;
                 },
                 [](ExperimentConfig& c, const ordered_json& v, Errors& errors) {
                   std::set<StrongExtra> extras;
                   for (const auto& item : v) {
                     const auto name = item.get<std::string>();
                     if (const auto e = parse_strong_extra(name)) {
                       extras.insert(*e);
                     } else {
                       errors.push_back("strong_extras: unknown augmentation '" + name + "'");
                     }
                   }
                   c.train.augment.strong_extras = extras;
                 }});
    t.push_back(boolean("disable_supervised", [](ExperimentConfig& c) -> bool& { return c.train.disable_supervised; }));
    t.push_back(boolean("disable_contrastive", [](ExperimentConfig& c) -> bool& { return c.train.disable_contrastive; }));
    t.push_back(boolean("disable_self_supervised", [](ExperimentConfig& c) -> bool& {
      return c.train.disable_self_supervised;
    }));
    t.push_back(boolean("cosine_classifier", [](ExperimentConfig& c) -> bool& { return c.train.cosine_classifier; }));
    t.push_back(enumerated<NtXentDenominator>(
        "ntxent_denominator", [](ExperimentConfig& c) -> NtXentDenominator& { return c.train.ntxent_denominator; },
        parse_ntxent_denominator));
    t.push_back({"hidden", Kind::int_list,
                 [](const ExperimentConfig& c) { return ordered_json(c.train.hidden); },
                 [](ExperimentConfig& c, const ordered_json& v, Errors& errors) {
                   std::vector<std::size_t> widths;
                   for (const auto& item : v) {
                     if (item.is_number_integer() && item.get<std::int64_t>() > 0) {
                       widths.push_back(item.get<std::size_t>());
                     } else {
                       errors.push_back("hidden: widths must be positive integers");
                     }
                   }
                   c.train.hidden = widths;
                 }});
    t.push_back(integer<std::size_t>("feature_dim", [](ExperimentConfig& c) -> std::size_t& { return c.train.feature_dim; }));
    t.push_back(integer<std::uint64_t>("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.train.seed; }));
    t.push_back(integer<std::size_t>("repeats", [](ExperimentConfig& c) -> std::size_t& { return c.repeats; }));
    t.push_back({"output_dir", Kind::text,
                 [](const ExperimentConfig& c) { return ordered_json(c.output_dir.string()); },
                 [](ExperimentConfig& c, const ordered_json& v, Errors&) { c.output_dir = v.get<std::string>(); }});
    return t;
  }();
  return table;
}

const KeySpec* find_key(std::string_view name) {
  for (const KeySpec& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

bool matches(Kind kind, const ordered_json& v) {
  switch (kind) {
    case Kind::number: return v.is_number();
    case Kind::integer: return v.is_number_integer();
    case Kind::boolean: return v.is_boolean();
    case Kind::text: return v.is_string();
    case Kind::int_list:
    case Kind::text_list: return v.is_array();
  }
  return false;
}

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::number: return "a number";
    case Kind::integer: return "an integer";
    case Kind::boolean: return "a boolean";
    case Kind::text: return "a string";
    case Kind::int_list: return "an array of integers";
    case Kind::text_list: return "an array of strings";
  }
  return "?";
}

void set_value(ExperimentConfig& cfg, const KeySpec& key, const ordered_json& v, Errors& errors) {
  if (!matches(key.kind, v)) {
    errors.push_back(key.name + ": expected " + std::string(kind_name(key.kind)));
    return;
  }
  if (key.kind == Kind::text_list) {
    for (const auto& item : v) {
      if (!item.is_string()) {
        errors.push_back(key.name + ": expected " + std::string(kind_name(key.kind)));
        return;
      }
    }
  }
  key.set(cfg, v, errors);
}

std::vector<std::string> split_commas(std::string_view text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(current);
      current.clear();
    } else if (c != ' ') {
      current += c;
    }
  }
  if (!current.empty() || !parts.empty()) parts.push_back(current);
  return parts;
}

ordered_json parse_scalar(Kind kind, const std::string& text, const std::string& key) {
  switch (kind) {
    case Kind::text: return text;
    case Kind::boolean:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError(key + ": expected true or false, got '" + text + "'");
    case Kind::number:
    case Kind::integer: {
      ordered_json v;
      try {
        v = ordered_json::parse(text);
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(key + ": expected " + std::string(kind_name(kind)) + ", got '" + text + "'");
      }
      return v;
    }
    default: break;
  }
  return text;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const KeySpec& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return keys;
}

void ExperimentConfig::validate() const {
  Errors errors;
  try {
    train.validate();
  } catch (const ConfigError& e) {
    std::istringstream lines(e.what());
    std::string line;
    std::getline(lines, line);  // headline
    while (std::getline(lines, line)) errors.push_back(line.substr(line.find("- ") + 2));
  }
  if (repeats == 0) errors.push_back("repeats must be >= 1");
  if (!dataset_path) {
    if (shift.num_classes == 0) errors.push_back("num_classes must be positive");
    if (!(shift.shift_magnitude >= 0.0)) errors.push_back("shift_magnitude must be >= 0");
    if (shift.channels == 0 || shift.height == 0 || shift.width == 0) {
      errors.push_back("image dimensions must be positive");
    }
    const std::size_t needed =
        std::size_t{shift.num_classes} * (train.shots + kValidationPerClass + kMinUnlabeledPerClass);
    if (shift.samples_per_domain < needed) {
      errors.push_back("samples_per_domain must be >= num_classes * (shots + 13) = " + std::to_string(needed));
    }
  }
  if (train.objective == Objective::supervised_only && train.disable_supervised) {
    errors.push_back("method s_plus_t with disable_supervised leaves nothing to train");
  }
  if (!errors.empty()) {
    std::string msg = "invalid experiment configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.shift.generator = Generator::textured_grid;
  cfg.shift.num_classes = 5;
  cfg.shift.samples_per_domain = 400;
  cfg.shift.shift_kind = ShiftKind::noise;
  cfg.shift.shift_magnitude = 0.35;
  cfg.train.temperature = 0.05;
  cfg.train.threshold = 0.9;
  cfg.train.shots = 3;
  return cfg;
}

ExperimentConfig parse_experiment_config(std::string_view json_text, ExperimentConfig base) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a flat JSON object");
  Errors errors;
  for (const auto& [key, value] : doc.items()) {
    const KeySpec* spec = find_key(key);
    if (!spec) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    set_value(base, *spec, value, errors);
  }
  if (!errors.empty()) {
    std::string msg = "invalid experiment configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  base.validate();
  return base;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str());
}

void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key '" + std::string(key) + "'");
  ordered_json v;
  if (spec->kind == Kind::int_list || spec->kind == Kind::text_list) {
    v = ordered_json::array();
    const Kind item = spec->kind == Kind::int_list ? Kind::integer : Kind::text;
    for (const auto& part : split_commas(value)) v.push_back(parse_scalar(item, part, spec->name));
  } else {
    v = parse_scalar(spec->kind, std::string(value), spec->name);
  }
  Errors errors;
  set_value(cfg, *spec, v, errors);
  if (!errors.empty()) throw ConfigError(errors.front());
}

std::string to_json_text(const ExperimentConfig& cfg) {
  ordered_json doc = ordered_json::object();
  for (const KeySpec& k : key_table()) doc[k.name] = k.get(cfg);
  return doc.dump(2) + "\n";
}

}  // namespace con2da
