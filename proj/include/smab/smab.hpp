// Copyright 2026 The smab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "smab/attack.hpp"
#include "smab/bandit.hpp"
#include "smab/cache.hpp"
#include "smab/config.hpp"
#include "smab/corpus.hpp"
#include "smab/engine.hpp"
#include "smab/errors.hpp"
#include "smab/evaluation.hpp"
#include "smab/local_sensitivity.hpp"
#include "smab/mock_server.hpp"
#include "smab/oracle.hpp"
#include "smab/random.hpp"
#include "smab/remote.hpp"
#include "smab/text.hpp"
