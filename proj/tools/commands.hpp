#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace projmc2::cli {

struct SimulateArgs {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct FitArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct DiagnoseArgs {
  std::filesystem::path chain;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> out;  // defaults to the chain directory
};

struct CompareArgs {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path out;
};

void cmd_simulate(const SimulateArgs& args, std::ostream& log);
void cmd_fit(const FitArgs& args, std::ostream& log);
void cmd_diagnose(const DiagnoseArgs& args, std::ostream& log);
void cmd_compare(const CompareArgs& args, std::ostream& log);

}  // namespace projmc2::cli
