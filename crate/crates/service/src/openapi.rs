use serde_json::{json, Value};

fn error_response(description: &str) -> Value {
    json!({
        "description": description,
        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}
    })
}

fn run_id_param() -> Value {
    json!({"name": "id", "in": "path", "required": true, "schema": {"type": "string", "format": "uuid"}})
}

/// OpenAPI 3 description of the service.
pub fn document() -> Value {
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "dynabo service",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Start optimization runs, follow their event logs and steer them with priors."
        },
        "paths": {
            "/runs": {
                "post": {
                    "summary": "Start a run",
                    "description": "prior_mode must be `interactive` or `scheduled`.",
                    "requestBody": {"required": true, "content": {"application/json": {"schema": {"$ref": "#/components/schemas/RunConfig"}}}},
                    "responses": {
                        "201": {"description": "Run started", "content": {"application/json": {"schema": {
                            "type": "object", "properties": {"run_id": {"type": "string", "format": "uuid"}}, "required": ["run_id"]}}}},
                        "400": error_response("Invalid run config")
                    }
                },
                "get": {
                    "summary": "List runs",
                    "responses": {"200": {"description": "Run summaries", "content": {"application/json": {"schema": {
                        "type": "array", "items": {"$ref": "#/components/schemas/RunSummary"}}}}}}
                }
            },
            "/runs/{id}": {
                "get": {
                    "summary": "Run summary with its config",
                    "parameters": [run_id_param()],
                    "responses": {"200": {"description": "Summary"}, "404": error_response("Unknown run")}
                }
            },
            "/runs/{id}/state": {
                "get": {
                    "summary": "Latest snapshot",
                    "parameters": [run_id_param()],
                    "responses": {
                        "200": {"description": "Snapshot", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Snapshot"}}}},
                        "404": error_response("Unknown run")
                    }
                }
            },
            "/runs/{id}/events": {
                "get": {
                    "summary": "Event stream",
                    "description": "Server-sent events. Replays the log (after `Last-Event-ID` when given) and follows it live. Each message has the event's `seq` as id, its kind as event name and the JSON event as data. The stream ends after the `finished` event; a failed run ends with an `error` message.",
                    "parameters": [run_id_param(), {"name": "Last-Event-ID", "in": "header", "required": false, "schema": {"type": "integer"}}],
                    "responses": {"200": {"description": "SSE stream", "content": {"text/event-stream": {"schema": {"$ref": "#/components/schemas/Event"}}}}, "404": error_response("Unknown run")}
                }
            },
            "/runs/{id}/slice": {
                "get": {
                    "summary": "Surrogate mean and variance along one hyperparameter through the incumbent",
                    "parameters": [
                        run_id_param(),
                        {"name": "dim", "in": "query", "required": true, "schema": {"type": "string"}},
                        {"name": "points", "in": "query", "required": false, "schema": {"type": "integer", "default": 50, "minimum": 2, "maximum": 1000}}
                    ],
                    "responses": {
                        "200": {"description": "Slice", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Slice"}}}},
                        "400": error_response("Unknown or inactive hyperparameter"),
                        "404": error_response("Unknown run"),
                        "409": error_response("No surrogate fitted yet")
                    }
                }
            },
            "/runs/{id}/priors": {
                "post": {
                    "summary": "Submit a prior",
                    "description": "Gated synchronously against the latest snapshot. The decision reaches the engine at its next iteration boundary; accepted priors start shaping proposals from the iteration after.",
                    "parameters": [run_id_param()],
                    "requestBody": {"required": true, "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Prior"}}}},
                    "responses": {
                        "200": {"description": "Verdict", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/PriorVerdict"}}}},
                        "400": error_response("Invalid prior"),
                        "404": error_response("Unknown run"),
                        "409": error_response("Run has ended or has no observations yet"),
                        "503": error_response("Prior queue full")
                    }
                }
            },
            "/runs/{id}/priors/{pid}/override": {
                "post": {
                    "summary": "Activate a rejected prior",
                    "parameters": [run_id_param(), {"name": "pid", "in": "path", "required": true, "schema": {"type": "string"}}],
                    "responses": {
                        "200": {"description": "Overridden verdict", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/PriorVerdict"}}}},
                        "404": error_response("Unknown run or prior"),
                        "409": error_response("Prior already accepted, or run has ended")
                    }
                }
            },
            "/spec": {"get": {"summary": "This document", "responses": {"200": {"description": "OpenAPI document"}}}},
            "/ui": {"get": {"summary": "Steering page", "responses": {"200": {"description": "HTML"}}}}
        },
        "components": {
            "schemas": {
                "Error": {"type": "object", "properties": {"error": {"type": "string"}}, "required": ["error"]},
                "RunConfig": {
                    "type": "object",
                    "required": ["objective", "budget"],
                    "properties": {
                        "objective": {"type": "string", "enum": ["branin", "hartmann6", "rastrigin4", "mixed_synth"]},
                        "budget": {"type": "integer", "minimum": 1},
                        "surrogate": {"type": "string", "enum": ["gp", "rf"]},
                        "beta": {"type": "number"},
                        "tau": {"oneOf": [{"type": "number"}, {"type": "string", "enum": ["inf", "-inf"]}]},
                        "kappa": {"type": "number"},
                        "decay_power": {"type": "number"},
                        "n_init": {"type": "integer"},
                        "seed": {"type": "integer"},
                        "prior_mode": {"type": "string", "enum": ["none", "scheduled", "random_timing", "interactive"]},
                        "schedule": {"type": "array", "items": {"type": "object", "properties": {
                            "iteration": {"type": "integer"},
                            "policy": {"type": "string", "enum": ["expert", "advanced", "local", "adversarial"]}}}},
                        "iteration_delay_ms": {"type": "integer"},
                        "wall_clock": {"type": "boolean"}
                    }
                },
                "RunSummary": {"type": "object", "properties": {
                    "run_id": {"type": "string", "format": "uuid"},
                    "status": {"type": "string", "enum": ["created", "running", "awaiting_prior_decision", "finished", "failed"]},
                    "objective": {"type": "string"},
                    "iteration": {"type": "integer"},
                    "budget": {"type": "integer"},
                    "error": {"type": "string"}
                }},
                "Prior": {
                    "type": "object",
                    "required": ["center"],
                    "properties": {
                        "label": {"type": "string"},
                        "center": {"type": "object", "additionalProperties": {"oneOf": [{"type": "number"}, {"type": "string"}]}},
                        "stds": {"type": "object", "additionalProperties": {"type": "number"}},
                        "categorical_off_mass": {"type": "number"}
                    }
                },
                "GateVerdict": {"type": "object", "properties": {
                    "accepted": {"type": "boolean"},
                    "prior_mean_lcb": {"type": "number"},
                    "incumbent_mean_lcb": {"type": "number"},
                    "margin": {"type": "number"},
                    "tau": {"oneOf": [{"type": "number"}, {"type": "string"}]},
                    "sample_count": {"type": "integer"},
                    "overridden": {"type": "boolean"}
                }},
                "PriorVerdict": {"type": "object", "properties": {
                    "prior_id": {"type": "string"},
                    "verdict": {"$ref": "#/components/schemas/GateVerdict"}
                }},
                "Event": {"type": "object", "properties": {
                    "seq": {"type": "integer"},
                    "kind": {"type": "string", "enum": ["trial", "incumbent_update", "prior_submitted", "prior_verdict", "prior_overridden", "prior_activated", "warning", "finished"]},
                    "iteration": {"type": "integer"},
                    "payload": {"type": "object"},
                    "wall_time": {"type": "string"}
                }},
                "Snapshot": {"type": "object", "properties": {
                    "objective": {"type": "string"},
                    "seed": {"type": "integer"},
                    "budget": {"type": "integer"},
                    "known_min": {"type": "number"},
                    "status": {"type": "string"},
                    "iteration": {"type": "integer"},
                    "trials": {"type": "array", "items": {"type": "object"}},
                    "incumbent": {"type": "object", "nullable": true},
                    "regret": {"type": "number", "nullable": true},
                    "active_priors": {"type": "array", "items": {"type": "object"}},
                    "priors": {"type": "array", "items": {"type": "object"}},
                    "event_count": {"type": "integer"}
                }},
                "Slice": {"type": "object", "properties": {
                    "dim": {"type": "string"},
                    "iteration": {"type": "integer"},
                    "incumbent": {},
                    "points": {"type": "array", "items": {"type": "object", "properties": {
                        "value": {}, "mean": {"type": "number"}, "variance": {"type": "number"}}}}
                }}
            }
        }
    })
}
