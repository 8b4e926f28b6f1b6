#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace exattn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "EXATTN_OUT_DIR";

// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat "key = value" file; '#' starts a comment. Throws FormatError naming the line.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

}  // namespace exattn::cli
