#ifndef LIPS_COMMANDS_HPP
#define LIPS_COMMANDS_HPP

#include <string>
#include <vector>

#include "lips/run_config.hpp"

namespace lips {

// Process exit codes of the lips tool.
enum ExitCode { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitCollapse = 3, kExitIo = 4 };

struct CommandOptions {
  std::string out;  // output directory
  bool svg = false;
};

void cmd_generate(const RunConfig& rc, const CommandOptions& opt);
void cmd_oracle(const RunConfig& rc, const CommandOptions& opt);
// train-twist: sleep-phase pretraining only, at a fixed theta
void cmd_train_twist(const RunConfig& rc, const CommandOptions& opt);
void cmd_train(const RunConfig& rc, const CommandOptions& opt);
void cmd_infer(const RunConfig& rc, const CommandOptions& opt);
void cmd_evaluate(const RunConfig& rc, const CommandOptions& opt);

// Dispatch by name. Maps library errors to exit codes and prints them.
int run_command(const std::string& command, const RunConfig& rc, const CommandOptions& opt);
int exit_code_for_current_exception();

// Numeric columns of a CSV file; lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<double> column(const std::string& name) const;
};
CsvTable read_csv(const std::string& file);

// mean and two standard errors across entries
struct Summary {
  double mean = 0.0, two_se = 0.0;
  long n = 0;
};
Summary summarize(const std::vector<double>& x);

}  // namespace lips

#endif
