#pragma once

// Staged outputs for one CLI run: files are buffered, written together with
// a manifest of their SHA-256 digests, re-read to check the digests, and
// removed again if anything fails.

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>

namespace alignteach::cli {

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {}

    // `name` may contain subdirectories.
    void stage(const std::string& name, std::string contents);

    // Records an input file's digest in the manifest.
    void note_input(const std::string& label, const std::filesystem::path& path);

    void commit(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                const std::string& version);

private:
    void rollback() noexcept;

    std::filesystem::path root_;
    std::map<std::string, std::string> staged_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::filesystem::path> created_;
};

}  // namespace alignteach::cli
