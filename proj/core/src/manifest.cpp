#include "rofdec/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "rofdec/errors.hpp"

namespace rofdec {

std::string Manifest::arg(const std::string& key) const {
    auto it = args.find(key);
    if (it == args.end()) throw ConfigError("manifest is missing argument '" + key + "'");
    return it->second;
}

void Manifest::write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    j["subcommand"] = subcommand;
    j["args"] = args;
    j["outputs_fnv64"] = output_fnv64;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open manifest for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("short write to manifest: " + path);
}

Manifest Manifest::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed manifest " + path + ": " + e.what());
    }
    Manifest m;
    m.command = j.value("command", "");
    m.subcommand = j.value("subcommand", "");
    if (j.contains("args"))
        for (const auto& [k, v] : j["args"].items()) m.args[k] = v.get<std::string>();
    if (j.contains("outputs_fnv64"))
        for (const auto& [k, v] : j["outputs_fnv64"].items()) m.output_fnv64[k] = v.get<std::string>();
    return m;
}

}  // namespace rofdec
