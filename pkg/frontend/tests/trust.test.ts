import { describe, expect, it } from "vitest";

import { diffVerdicts, filterFinding, validateModel } from "../src/trust.js";
import type { Finding, ThreatModel } from "../src/types.js";

const fusaka: ThreatModel = {
  actors: [
    { actor_id: "external_peer", trust: "UNTRUSTED" },
    { actor_id: "el_client", trust: "TRUSTED" },
    { actor_id: "cl_client", trust: "TRUSTED" },
    { actor_id: "validator", trust: "SEMI_TRUSTED" },
  ],
  edges: [
    {
      from_actor: "external_peer",
      to_actor: "cl_client",
      channel: "gossip",
      crossing_trust: "UNTRUSTED",
    },
    {
      from_actor: "el_client",
      to_actor: "cl_client",
      channel: "engine_api",
      crossing_trust: "TRUSTED",
    },
  ],
  scope_tags: ["custody", "networking"],
};

function finding(id: string, actor: string, scope = "custody"): Finding {
  return {
    finding_id: id,
    req_id: "R",
    item_id: "R/CORRECTNESS",
    impl_id: "nimbus",
    location: { impl_id: "nimbus", path: "x.go", line_start: 1, line_end: 1, symbol: "" },
    violation: "v",
    strategy: "A_static",
    capability: {
      acting_actor: actor,
      required_trust: "UNTRUSTED",
      scope_tag: scope,
      via_edge: null,
    },
    severity: "Low",
    impact_fraction: 0.02,
    status: "NEEDS_HUMAN_VERIFICATION",
    fp_category: null,
    filter_reason: null,
    poc_attached: false,
    discovered_week: 1,
    source_finding_id: null,
  };
}

describe("validateModel", () => {
  it("accepts the well-formed model", () => {
    const { errors, warnings } = validateModel(fusaka);
    expect(errors).toEqual([]);
    expect(warnings).toEqual([]);
  });

  it("flags dangling edges on the offending row", () => {
    const model: ThreatModel = {
      ...fusaka,
      edges: [
        ...fusaka.edges,
        { from_actor: "ghost", to_actor: "cl_client", channel: "x", crossing_trust: "UNTRUSTED" },
      ],
    };
    const { errors } = validateModel(model);
    expect(errors).toHaveLength(1);
    expect(errors[0]?.kind).toBe("DanglingEdge");
    expect(errors[0]?.edgeIndex).toBe(2);
  });

  it("flags duplicate actors", () => {
    const model: ThreatModel = {
      ...fusaka,
      actors: [...fusaka.actors, { actor_id: "el_client", trust: "UNTRUSTED" }],
    };
    expect(validateModel(model).errors[0]?.kind).toBe("DuplicateActor");
  });

  it("warns (not errors) on a vacuous model", () => {
    const model: ThreatModel = {
      actors: [{ actor_id: "a", trust: "TRUSTED" }],
      edges: [],
      scope_tags: [],
    };
    const { errors, warnings } = validateModel(model);
    expect(errors).toEqual([]);
    expect(warnings[0]?.kind).toBe("VacuousModel");
  });
});

describe("filterFinding mirror", () => {
  it("filters trusted actors as misalignment", () => {
    const verdict = filterFinding(fusaka, finding("F-1", "el_client").capability);
    expect(verdict).toEqual({ keep: false, reason: "threat_model_misalignment" });
  });

  it("keeps untrusted in-scope demands", () => {
    const verdict = filterFinding(fusaka, finding("F-1", "external_peer").capability);
    expect(verdict).toEqual({ keep: true, penalty: false });
  });

  it("filters out-of-scope tags", () => {
    const verdict = filterFinding(
      fusaka,
      finding("F-1", "external_peer", "prehistory").capability,
    );
    expect(verdict).toEqual({ keep: false, reason: "out_of_scope" });
  });

  it("keeps semi-trusted actors with a penalty", () => {
    const verdict = filterFinding(fusaka, finding("F-1", "validator").capability);
    expect(verdict).toEqual({ keep: true, penalty: true });
  });

  it("filters untrusted demands crossing a trusted edge", () => {
    const demand = {
      ...finding("F-1", "external_peer").capability,
      via_edge: ["el_client", "cl_client"] as [string, string],
    };
    expect(filterFinding(fusaka, demand)).toEqual({
      keep: false,
      reason: "threat_model_misalignment",
    });
  });
});

describe("diffVerdicts", () => {
  it("reports exactly the findings whose verdict flips", () => {
    const findings = [
      finding("F-1", "el_client"), // FILTER now, KEEP after relaxing
      finding("F-2", "external_peer"), // KEEP either way
      finding("F-3", "external_peer", "prehistory"), // FILTER either way
    ];
    const relaxed: ThreatModel = {
      ...fusaka,
      actors: fusaka.actors.map((a) =>
        a.actor_id === "el_client" ? { ...a, trust: "UNTRUSTED" as const } : a,
      ),
    };
    const flips = diffVerdicts(fusaka, relaxed, findings);
    expect(flips).toEqual([
      { finding_id: "F-1", before: "FILTER", after: "KEEP" },
    ]);
  });

  it("no-op drafts produce an empty diff", () => {
    expect(diffVerdicts(fusaka, fusaka, [finding("F-1", "el_client")])).toEqual([]);
  });
});
