// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "abi.hpp"
#include "arith.hpp"
#include "assembler.hpp"
#include "chain.hpp"
#include "codec.hpp"
#include "contracts.hpp"
#include "digest.hpp"
#include "errors.hpp"
#include "explorer.hpp"
#include "feed.hpp"
#include "filters.hpp"
#include "fixtures.hpp"
#include "ingest.hpp"
#include "interpreter.hpp"
#include "ioc_block.hpp"
#include "ioc_evm.hpp"
#include "opcodes.hpp"
#include "orchestrator.hpp"
#include "state.hpp"
#include "trace.hpp"
#include "transaction.hpp"
#include "vuln.hpp"
#include "word.hpp"
