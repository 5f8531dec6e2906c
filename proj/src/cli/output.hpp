#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace acdn::cli {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

// An output directory whose files are each written to a temporary sibling
// and renamed into place, so readers never see a partial artifact.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir);

    const std::filesystem::path& path() const { return dir_; }

    void write(const std::string& name, std::string_view content);
    void write_json(const std::string& name, const nlohmann::json& doc);
    // One compact document per line.
    void write_jsonl(const std::string& name, const std::vector<nlohmann::json>& docs);

    // Records an input file for the manifest.
    void add_input(const std::string& role, const std::filesystem::path& path);

    // manifest.json: subcommand, effective config, input and output digests.
    // Written last; it lists every artifact written before it.
    void write_manifest(const std::string& subcommand, const nlohmann::json& config);

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> outputs_;  // name, digest
    nlohmann::json inputs_ = nlohmann::json::array();
};

}  // namespace acdn::cli
