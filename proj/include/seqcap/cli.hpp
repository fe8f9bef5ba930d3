#pragma once

namespace seqcap {

// Command-line entry point. Subcommands: synth, train, finetune, generate,
// evaluate, gradcheck. Returns the process exit status: 0 on success, 1 on
// a usage error, 2 on a data or model error.
int run(int argc, const char* const* argv);

}  // namespace seqcap
