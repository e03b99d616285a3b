#pragma once

#include "sead/agent.hpp"
#include "sead/arena.hpp"
#include "sead/backend.hpp"
#include "sead/behavior_library.hpp"
#include "sead/config.hpp"
#include "sead/error.hpp"
#include "sead/format.hpp"
#include "sead/grpo.hpp"
#include "sead/io.hpp"
#include "sead/keyvalue.hpp"
#include "sead/log.hpp"
#include "sead/metrics.hpp"
#include "sead/profile_controller.hpp"
#include "sead/random.hpp"
#include "sead/softmax.hpp"
#include "sead/state_space.hpp"
#include "sead/training.hpp"
#include "sead/trajectory.hpp"
#include "sead/user_model.hpp"
