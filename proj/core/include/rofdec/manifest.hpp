#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace rofdec {

// Self-description of one CLI run: the fully resolved arguments plus hashes
// of every produced file. Re-running from a manifest must reproduce the
// outputs byte for byte.
struct Manifest {
    std::string command;                            // e.g. "sweep"
    std::string subcommand;                         // e.g. "power"
    std::map<std::string, std::string> args;        // resolved flag -> value
    std::map<std::string, std::string> output_fnv64;  // file name -> hash hex

    std::string arg(const std::string& key) const;  // throws ConfigError if absent
    bool has_arg(const std::string& key) const { return args.count(key) > 0; }

    void write(const std::string& path) const;
    static Manifest read(const std::string& path);
};

}  // namespace rofdec
