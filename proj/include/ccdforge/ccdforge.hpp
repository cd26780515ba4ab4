#pragma once

// Umbrella header: the full dialogue-synthesis and evaluation library.
// The HTTP backend lives in ccdforge/http_provider.hpp and is deliberately
// excluded here; include it directly when a remote backend is needed.

#include "ccdforge/agents.hpp"
#include "ccdforge/ccd.hpp"
#include "ccdforge/eval.hpp"
#include "ccdforge/gateway.hpp"
#include "ccdforge/jsonl.hpp"
#include "ccdforge/prompt.hpp"
#include "ccdforge/quality.hpp"
#include "ccdforge/result.hpp"
#include "ccdforge/seeds.hpp"
#include "ccdforge/session.hpp"
#include "ccdforge/structured.hpp"
#include "ccdforge/taxonomy.hpp"
#include "ccdforge/templates.hpp"
