#pragma once

#include "config.hpp"

namespace tmscm::cli {

int cmd_gen(const Common& common);
int cmd_train(const Common& common);
int cmd_infer(const Common& common);
int cmd_eval(const Common& common);
int cmd_report(const Common& common);
int cmd_validate(const Common& common);

}  // namespace tmscm::cli
