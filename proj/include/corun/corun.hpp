/*
 * Copyright (c) The corun-affinity Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "corun/campaign_store.hpp"
#include "corun/csv.hpp"
#include "corun/error.hpp"
#include "corun/fake_runner.hpp"
#include "corun/harness.hpp"
#include "corun/metrics.hpp"
#include "corun/model.hpp"
#include "corun/planner.hpp"
#include "corun/process_runner.hpp"
#include "corun/store.hpp"
#include "corun/util.hpp"
#include "corun/workload_file.hpp"
