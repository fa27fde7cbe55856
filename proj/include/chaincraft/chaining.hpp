// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "chaincraft/block.hpp"
#include "chaincraft/chain.hpp"
#include "chaincraft/full.hpp"
#include "chaincraft/offdiag.hpp"
#include "chaincraft/patch.hpp"
