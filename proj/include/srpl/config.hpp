#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "srpl/trainer.hpp"

namespace srpl {

/// Everything a `train` invocation needs: one TrainConfig per seed.
struct RunConfig {
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
    std::string output_dir = "runs";

    TrainConfig for_seed(std::uint64_t seed) const;
    void validate() const;
};

struct ConfigError : std::runtime_error {
    ConfigError(std::string k, const std::string& msg) : std::runtime_error(msg), key(std::move(k)) {}
    std::string key;
};

// Flat `section.key = value` lines; '#' starts a comment. Unknown keys and
// unparsable values raise ConfigError naming the key. Keys listed in
// `passthrough_prefixes` are returned in `extra` instead of being rejected.
RunConfig parse_run_config(std::string_view text, std::map<std::string, std::string>* extra = nullptr,
                           std::vector<std::string_view> passthrough_prefixes = {});

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);
std::vector<std::string> config_keys();

// Every key with its resolved value, in a fixed order.
std::string to_config_text(const RunConfig& cfg);

}  // namespace srpl
