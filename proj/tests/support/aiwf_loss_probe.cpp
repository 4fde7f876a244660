// Prints the mean next-token loss of a checkpoint on a token list:
//   aiwf_loss_probe <model.aiwf> <t0,t1,...> [layer:head,...]
#include <cstdio>
#include <exception>
#include <sstream>
#include <string>

#include "attninf/checkpoint.hpp"
#include "attninf/inference.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s model.aiwf tokens [mask]\n", argv[0]);
    return 1;
  }
  try {
    const auto ckpt = attninf::load_checkpoint(argv[1]);
    attninf::TokenSeq tokens;
    std::stringstream ts(argv[2]);
    for (std::string item; std::getline(ts, item, ',');) tokens.push_back(static_cast<attninf::TokenId>(std::stoul(item)));
    attninf::HeadMask mask;
    if (argc > 3) {
      std::stringstream ms(argv[3]);
      for (std::string item; std::getline(ms, item, ',');) {
        const auto colon = item.find(':');
        mask.insert({std::stoul(item.substr(0, colon)), std::stoul(item.substr(colon + 1))});
      }
    }
    std::printf("%.17g\n", attninf::mean_ce_loss(ckpt, tokens, mask));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
