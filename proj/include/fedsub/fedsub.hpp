// Copyright 2026 The fedsub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fedsub/audit.hpp"
#include "fedsub/database.hpp"
#include "fedsub/field.hpp"
#include "fedsub/ledger.hpp"
#include "fedsub/local_machine.hpp"
#include "fedsub/mdscode.hpp"
#include "fedsub/pir.hpp"
#include "fedsub/protocol.hpp"
#include "fedsub/simulation.hpp"
#include "fedsub/socket.hpp"
#include "fedsub/trainer.hpp"
#include "fedsub/transport.hpp"
#include "fedsub/view.hpp"
