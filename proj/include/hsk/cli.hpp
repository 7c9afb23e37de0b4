#pragma once

// Command-line front end: JSON experiment configs, schema checks, run
// manifests and the per-subcommand pipelines.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hsk::cli {

using json = nlohmann::ordered_json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 1;
inline constexpr int exit_numerical = 2;
inline constexpr int exit_check_failed = 3;

/// Name of the environment variable holding the default output root.
inline constexpr const char* output_root_env = "HSK_OUTPUT_ROOT";

struct Diagnostic {
    std::string field; ///< dotted path, e.g. "enskog.epsilon"
    std::string message;
    std::string str() const { return field + ": " + message; }
};

/// Subcommands that run a pipeline (everything but validate).
const std::vector<std::string>& pipeline_commands();

/// JSON Schema (draft 2020-12) of the config document.
json schema_document();

/// Full schema and cross-field checks of every section present. `section`
/// restricts section checks to one pipeline; global fields are always checked.
std::vector<Diagnostic> validate_config(const json& config,
                                        std::optional<std::string> section = std::nullopt);

/// Global fields plus the named section with defaults filled in.
json resolve_config(const json& config, const std::string& section);

/// key=value with a dotted key; the value is parsed as JSON when possible,
/// else taken as a string.
void apply_override(json& config, std::string_view assignment);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Write to a sibling temporary, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

struct ManifestFile {
    std::string path; ///< relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string command;
    std::string config_path;
    std::string config_sha256;   ///< digest of the config file bytes
    json resolved_config;
    std::string resolved_sha256; ///< digest of resolved_config.dump()
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    json seeds;                  ///< derived stream seeds by name
    json versions;
    std::string started_at, finished_at; ///< UTC, ISO 8601
    double wall_seconds = 0.0;
    int threads = 0;
    std::vector<ManifestFile> files;
    json results;
    int exit_code = 0;

    json to_json() const;
};

json component_versions();

/// Re-hashes every listed file and the resolved config; one diagnostic per mismatch.
std::vector<Diagnostic> verify_manifest(const std::filesystem::path& manifest_path);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hsk::cli
