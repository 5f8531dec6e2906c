#include "output.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>

#include "acdn/error.hpp"

namespace acdn::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw InvariantError("sha256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DataError("read error on " + path.string());
    return std::move(ss).str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

nlohmann::json read_json_file(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

OutputDir::OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void OutputDir::write(const std::string& name, std::string_view content) {
    const fs::path target = dir_ / name;
    const fs::path tmp = dir_ / ("." + name + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw DataError("write failed for " + target.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw DataError("cannot rename into " + target.string() + ": " + ec.message());
    outputs_.emplace_back(name, sha256_hex(content));
}

void OutputDir::write_json(const std::string& name, const nlohmann::json& doc) { write(name, doc.dump(2) + "\n"); }

void OutputDir::write_jsonl(const std::string& name, const std::vector<nlohmann::json>& docs) {
    std::string text;
    for (const auto& d : docs) {
        text += d.dump();
        text += '\n';
    }
    write(name, text);
}

void OutputDir::add_input(const std::string& role, const fs::path& path) {
    inputs_.push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
}

void OutputDir::write_manifest(const std::string& subcommand, const nlohmann::json& config) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& [name, digest] : outputs_) outputs.push_back({{"path", name}, {"sha256", digest}});
    write_json("manifest.json",
               {{"subcommand", subcommand}, {"config", config}, {"inputs", inputs_}, {"outputs", std::move(outputs)}});
}

}  // namespace acdn::cli
