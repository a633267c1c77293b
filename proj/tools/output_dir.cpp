#include "output_dir.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "alignteach/error.hpp"

namespace alignteach::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::io, "SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void OutputDir::stage(const std::string& name, std::string contents) {
    if (name == "manifest.json") throw Error(ErrorKind::io, "manifest.json is reserved");
    staged_[name] = std::move(contents);
}

void OutputDir::note_input(const std::string& label, const fs::path& path) {
    inputs_[label] = sha256_hex(read_file(path));
}

void OutputDir::commit(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                       const std::string& version) {
    try {
        // Remember which directories we make so a failure leaves no trace.
        for (fs::path p = root_; !p.empty() && !fs::exists(p); p = p.parent_path()) created_.push_back(p);
        fs::create_directories(root_);

        nlohmann::json outputs = nlohmann::json::object();
        for (const auto& [name, contents] : staged_) {
            const fs::path path = root_ / name;
            for (fs::path p = path.parent_path(); p != root_ && !fs::exists(p); p = p.parent_path())
                created_.push_back(p);
            fs::create_directories(path.parent_path());
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
            created_.push_back(path);
            out << contents;
            out.close();
            if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
            outputs[name] = sha256_hex(contents);
        }
        nlohmann::json manifest{{"tool", "alignteach"}, {"version", version}, {"command", command},
                                {"seed", seed},          {"config", config},   {"inputs", inputs_},
                                {"outputs", outputs}};
        const fs::path mpath = root_ / "manifest.json";
        {
            std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::io, "cannot write " + mpath.string());
            created_.push_back(mpath);
            out << manifest.dump(2) << '\n';
            if (!out) throw Error(ErrorKind::io, "write failed for " + mpath.string());
        }
        for (const auto& [name, digest] : outputs.items())
            if (sha256_hex(read_file(root_ / name)) != digest.get<std::string>())
                throw Error(ErrorKind::io, "digest mismatch after writing " + name);
    } catch (...) {
        rollback();
        throw;
    }
}

void OutputDir::rollback() noexcept {
    // Files first, then directories deepest-first; non-empty directories
    // (which held something before this run) are left alone.
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it)
        if (fs::is_regular_file(*it, ec)) fs::remove(*it, ec);
    std::vector<fs::path> dirs;
    for (const auto& p : created_)
        if (fs::is_directory(p, ec)) dirs.push_back(p);
    std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
        return a.string().size() > b.string().size();
    });
    for (const auto& d : dirs) fs::remove(d, ec);
}

}  // namespace alignteach::cli
