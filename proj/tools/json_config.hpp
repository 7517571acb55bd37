#pragma once

// CLI11 config formatter for JSON documents. Objects map to subcommand
// sections; every scalar is carried as its exact text.

#include <charconv>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace dspr::cli {

class JsonConfig : public CLI::Config {
 public:
  /// Writes the options of `app` and of every subcommand that was selected,
  /// skipping `--help` and `--config`.
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override {
    (void)write_description;
    (void)prefix;
    return section(app, default_also).dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static nlohmann::json section(const CLI::App* app, bool default_also) {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (name == "help" || name == "config") continue;
      if (opt->get_type_size() != 0) {
        if (opt->count() == 1)
          j[name] = opt->results().at(0);
        else if (opt->count() > 1)
          j[name] = opt->results();
        else if (default_also && !opt->get_default_str().empty())
          j[name] = opt->get_default_str();
      } else if (opt->count() > 0) {
        j[name] = "true";
      } else if (default_also) {
        j[name] = "false";
      }
    }
    for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = section(sub, default_also);
    return j;
  }

  static std::string scalar_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
      return std::string(buf, res.ptr);
    }
    throw CLI::ConversionError("config values must be scalars or arrays of scalars");
  }

  static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const nlohmann::json& v = it.value();
      if (v.is_object()) {
        std::vector<std::string> path = parents;
        path.push_back(it.key());
        // Section markers let CLI11 activate the subcommand named by the key.
        items.push_back(marker(path, "++"));
        flatten(v, path, items);
        items.push_back(marker(path, "--"));
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar_text(e));
      } else {
        item.inputs = {scalar_text(v)};
      }
      items.push_back(std::move(item));
    }
  }

  static CLI::ConfigItem marker(const std::vector<std::string>& path, const char* name) {
    CLI::ConfigItem item;
    item.parents = path;
    item.name = name;
    return item;
  }
};

}  // namespace dspr::cli
