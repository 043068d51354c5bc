#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fluctsim {

const char* fluctsim_version();

// FNV-1a, 64 bit. Fast, dependency-free, and stable across platforms; used
// for manifest content hashes, not for anything adversarial.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::uint64_t h);

// printf %.17g, the round-trip format used for every CSV value.
std::string format_g17(double x);

struct ManifestFile {
    std::string path;   // relative to the artifact directory
    std::uint64_t bytes = 0;
    std::string sha;    // fnv1a64 of the contents, hex
};

// Written as manifest.json next to the artifacts. Re-running the tool with
// the same config and seed reproduces every listed file bitwise.
struct RunManifest {
    std::string tool_version;
    std::string config_hash;   // fnv1a64 of the verbatim config text
    std::uint64_t base_seed = 0;
    std::vector<std::uint64_t> run_seeds;
    double wall_clock_seconds = 0.0;
    std::vector<ManifestFile> files;
};

void write_manifest_json(std::ostream& os, const RunManifest& m);

// Reads a whole file into a string; throws std::runtime_error when the file
// cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Content hash of a file on disk, for the manifest inventory.
ManifestFile inventory_file(const std::string& dir, const std::string& name);

}  // namespace fluctsim
