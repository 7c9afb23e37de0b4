#include "hsk/cli.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "hsk/errors.hpp"

namespace hsk::cli {

namespace {

std::string read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

std::string sha256_hex(std::string_view bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

void write_file_atomic(const std::filesystem::path& path, std::string_view contents)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ValidationError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out)
            throw ValidationError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ValidationError("cannot move " + tmp.string() + " into place");
    }
}

json RunManifest::to_json() const
{
    json j;
    j["command"] = command;
    j["config_path"] = config_path;
    j["config_sha256"] = config_sha256;
    j["overrides"] = overrides;
    j["resolved_config"] = resolved_config;
    j["resolved_sha256"] = resolved_sha256;
    j["seed"] = seed;
    j["seeds"] = seeds;
    j["versions"] = versions;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["wall_seconds"] = wall_seconds;
    j["threads"] = threads;
    json files_j = json::array();
    for (const auto& f : files)
        files_j.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    j["files"] = files_j;
    j["results"] = results;
    j["exit_code"] = exit_code;
    return j;
}

std::vector<Diagnostic> verify_manifest(const std::filesystem::path& manifest_path)
{
    std::vector<Diagnostic> d;
    json m;
    try {
        m = json::parse(read_bytes(manifest_path));
    } catch (const std::exception& e) {
        d.push_back({"manifest", e.what()});
        return d;
    }
    const auto dir = manifest_path.parent_path();
    if (!m.contains("resolved_config") || !m.contains("resolved_sha256") || !m.contains("files")) {
        d.push_back({"manifest", "missing resolved_config, resolved_sha256 or files"});
        return d;
    }
    if (sha256_hex(m["resolved_config"].dump()) != m["resolved_sha256"].get<std::string>())
        d.push_back({"resolved_sha256", "does not match the recorded resolved config"});
    const auto cfg = m.value("config_path", std::string{});
    if (!cfg.empty() && std::filesystem::exists(cfg) &&
        sha256_file(cfg) != m.value("config_sha256", std::string{}))
        d.push_back({"config_sha256", "config file " + cfg + " changed since the run"});
    for (const auto& f : m["files"]) {
        const auto rel = f.value("path", std::string{});
        const auto p = dir / rel;
        if (!std::filesystem::exists(p)) {
            d.push_back({"files", rel + ": missing"});
            continue;
        }
        if (sha256_file(p) != f.value("sha256", std::string{}))
            d.push_back({"files", rel + ": digest mismatch"});
    }
    return d;
}

} // namespace hsk::cli
