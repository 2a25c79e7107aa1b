#pragma once

// Theory engines: interchangeable rules for when a quantum property becomes
// stably differentiated and what determinate values arise.
//
//   grw        spontaneous localization of lattice (position) factors at a
//              fixed rate, Gaussian collapse operators, Born-weighted centers
//   mwi        deterministic branching into weighted worlds on decoherence,
//              in quasi-local, local, and global bookkeeping variants
//   relational single-world relative facts, sampled per observer (with an
//              any-interaction variant and a generator-gated variant)
//   endqt      determination capacity (DC) propagating along interaction
//              chains from initiator systems; determinate values only where
//              a live DC exists
//
// All engines sample outcomes through RngStream so runs are reproducible and
// statistically comparable across engines under a shared seed policy.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qdet/decomodels.hpp"
#include "qdet/differentiation.hpp"
#include "qdet/hilbert.hpp"
#include "qdet/rng.hpp"
#include "qdet/structures.hpp"

namespace qdet {

// ---- spontaneous collapse ---------------------------------------------------

struct GrwParams {
  double lambda = 1.0;  // collapse rate per generator per unit time
  double sigma = 0.1;   // localization width, lattice units

  // Config-level contract: both strictly positive and finite. The stepper
  // itself tolerates lambda == 0 (a rate-zero process never collapses).
  void validate() const;
};

struct CollapseEvent {
  std::string system;
  int center = 0;  // lattice site the Gaussian was centered on
  double t = 0.0;
};

struct GrwStepResult {
  StateVector state;
  std::vector<CollapseEvent> events;
};

// One time step (t0, t0+dt] of the collapse process. Each generator label
// must name a lattice factor of the state; independently of the others it
// collapses with probability 1 - exp(-lambda dt). A collapse samples its
// center from the factor's Born weights, multiplies the amplitudes by
// exp(-(x-c)^2 / (4 sigma^2)), and renormalizes. Generators are processed in
// the order given (one uniform draw each, hit or not, so the draw pattern is
// stable).
GrwStepResult grw_step(const StateVector& psi,
                       const std::vector<std::string>& generators, double dt,
                       const GrwParams& params, RngStream& rng, double t0 = 0.0);

struct CollapsePropagation {
  StateVector state;
  std::map<std::string, int> values;  // affected factor -> basis index
};

// Spread one collapse through the correlation structure. The state is
// projected exactly onto the collapsed factor's dominant site; every node
// reachable from `collapsed` through indetermination edges is pulled into
// the new collapse-DS: potential-destruction self-loops are promoted (the
// surviving location tag is the one at the dominant site's position in the
// node's lexicographically ordered location set),
// undifferentiation edges become stable-differentiation edges oriented away
// from the collapse, and all affected nodes acquire a determinate history.
// Affected nodes that name a state factor report their post-projection value.
CollapsePropagation grw_collapse_propagate(const StateVector& psi,
                                           const std::string& collapsed,
                                           StructureGraph& graph, double t);

// ---- many worlds ------------------------------------------------------------

enum class MwiVariant { QuasiLocal, Local, Global };

struct World {
  double weight = 0.0;
  StateVector state;
  // (system, property) -> eigenvalue fixed in this world
  std::map<std::pair<std::string, std::string>, double> assignments;
  StructureGraph graph;
};

struct WorldSet {
  std::vector<World> worlds;

  // Weights nonnegative and summing to 1 within 1e-9.
  void validate() const;
  // Drop worlds below weight 1e-12 and renormalize the rest.
  void prune();
};

// Branch on the pointer observable of one factor. Requires prior evidence of
// a quasi-irreversible decoherence process; otherwise nothing branches and a
// single unit-weight world carries the input state unchanged. One world per
// pointer eigenvector with weight above the pruning threshold; each world's
// state is the conditioned (relative) state.
//
// Variant semantics decide who else gets a value in each world:
//   QuasiLocal  every factor whose conditioned reduced state is a pointer
//               eigenstate is assigned its eigenvalue, including remote
//               entangled partners; their UDIs to the measured system become
//               SDIs pointing away from it.
//   Local       only the factors listed in `locals` (the measured system's
//               own wing) are eligible; remote partners stay undifferentiated
//               and their graph edges are untouched.
//   Global      like QuasiLocal, and systems sharing a world are additionally
//               linked by new SDI edges when none existed.
WorldSet mwi_branch(const StateVector& psi, const std::string& system,
                    const Observable& pointer, const std::string& property,
                    MwiVariant variant, const StructureGraph& graph,
                    const ProcessClass& evidence, double t,
                    const std::set<std::string>& locals = {});

struct WorldPair {
  double weight = 0.0;  // product of the wing weights
  int left = 0;         // index into the left WorldSet
  int right = 0;        // index into the right WorldSet
};

// Joint bookkeeping of two wings that branched independently (local
// variant): every combination of a left and a right world, weighted by the
// product, pruned at 1e-12. No shared fact links the wings until records
// meet, so all combinations coexist.
std::vector<WorldPair> mwi_pair_worlds(const WorldSet& left,
                                       const WorldSet& right);

// ---- single-world relationalism ---------------------------------------------

enum class RelationalVariant {
  Rqm,         // every interaction generates relative facts, any system observes
  SingleWorld  // only generator-flagged systems produce facts
};

struct RelativeFact {
  std::string observer;
  std::string observed;
  std::string property;
  double value = 0.0;
  double time = 0.0;
};

// Per-observer relative states plus the facts that produced them. A system
// absent from `relative` has not observed anything yet; its perspective is
// whatever base state the scenario supplies.
struct RelationalTable {
  std::map<std::string, StateVector> relative;
  std::vector<RelativeFact> facts;
};

// One interaction event in which `observer` reads the pointer property of
// `observed`. The outcome is Born-sampled from the state carrying the
// relevant records: the observed system's stored relative state when it has
// one (interaction shares its records), else the observer's own, else
// `base`. Only the observer's table entry is updated; everyone else's
// perspective is untouched. Under SingleWorld a non-generator observer
// produces no fact and consumes no randomness. Self-observation is invalid.
std::optional<RelativeFact> relational_interact(
    RelationalTable& table, const StateVector& base,
    const std::string& observer, const std::string& observed,
    const Observable& pointer, const std::string& property,
    RelationalVariant variant, const std::set<std::string>& generators,
    RngStream& rng, double t);

// ---- determination-capacity propagation --------------------------------------

struct DcRecord {
  std::string holder;
  std::string target;
  double granted_at = 0.0;
  std::string via;  // grantor; equal to holder for records seeded at setup
};

// Append-only record of who may determine whom. Universal initiators hold DC
// over any target by construction; origin systems may seed records without a
// grantor chain. Every other record must cite a grantor whose own DC was
// live no later than the grant.
class DcLedger {
 public:
  DcLedger(std::set<std::string> universal_initiators,
           std::set<std::string> origin_initiators);

  // Deserialization path: bypasses append-time validation; call audit().
  static DcLedger from_records(std::set<std::string> universal_initiators,
                               std::set<std::string> origin_initiators,
                               std::vector<DcRecord> records);

  bool is_initiator(const std::string& s) const;
  // A live DC: universal initiators always, otherwise any matching record.
  bool holds_dc(const std::string& holder, const std::string& target) const;

  // Setup-time seeding (an origin or universal initiator assigns itself DC
  // over a target it interacts with).
  void seed(const std::string& holder, const std::string& target, double t);
  // Grant-time append; validates holder != target and grantor liveness.
  void append(const DcRecord& r);

  // Every record's grant chain must terminate at an initiator within
  // non-decreasing timestamps; violations raise IntegrityError.
  void audit() const;

  const std::vector<DcRecord>& records() const { return records_; }

 private:
  bool grounded(std::size_t idx, std::vector<int>& state) const;

  std::set<std::string> universal_;
  std::set<std::string> origins_;
  std::vector<DcRecord> records_;
};

struct EnDqtParams {
  // (system label, kind): 'A' holds DC over anything by default, 'B' only
  // seeds configured records.
  std::vector<std::pair<std::string, char>> initiators;
  double eps = 0.05;       // classify_process off-diagonal tolerance
  double window = 1.0;     // classify_process trailing window
  int size_threshold = 2;  // classify_process minimum environment size

  void validate() const;
  DcLedger make_ledger() const;
};

struct GrantRequest {
  std::string holder;   // X, currently interacting with the grantee
  std::string grantee;  // Y, being decohered by X
  std::string target;   // Z, coupling to Y
};

struct GrantResult {
  bool granted = false;
  std::string reason;  // empty on success
};

// DC propagation rule. The grantee acquires DC over the target iff
//   (1) the holder has a live DC over the grantee,
//   (2) in the schedule, some target-grantee interaction begins strictly
//       inside a holder-grantee interaction interval,
//   (3) the holder-grantee decoherence is quasi-irreversible, and
//   (4) the target-grantee coupling commutes with the holder-grantee pointer
//       observable within `tol` (the coupling does not disturb the process).
// On success a record (grantee, target, via holder) is appended; on failure
// the ledger is untouched and the reason comes back for the event log.
GrantResult endqt_grant_dc(DcLedger& ledger, const InteractionSchedule& sched,
                           const GrantRequest& req,
                           const ProcessClass& process,
                           const Observable& target_coupling,
                           const Observable& pointer, double t,
                           double tol = 1e-6);

struct DeterminateEvent {
  bool occurred = false;
  std::string reason;  // populated when the event was refused
  std::map<std::string, double> values;  // holder and target share the value
  double t = 0.0;
  StateVector state;  // conditioned state, or the input when refused
};

// A determinate value arises from a holder-target interaction iff the holder
// has a live DC over the target and the interaction decohered the target
// quasi-irreversibly. The outcome is Born-sampled on the target's pointer;
// holder and target take the value in the same event (one timestamp), the
// state is conditioned on it, an SDI edge holder -> target joins the chain,
// and both nodes acquire a determinate history. A refused event changes
// nothing and consumes no randomness.
DeterminateEvent endqt_determinate_event(const StateVector& psi,
                                         const std::string& holder,
                                         const std::string& target,
                                         const Observable& pointer,
                                         const ProcessClass& process,
                                         const DcLedger& ledger,
                                         StructureGraph& graph, RngStream& rng,
                                         double t);

// Composite aggregation: a composite holds DC over a target iff every one of
// its subsystems holds DC over the target or over one of the target's
// subsystems.
bool composite_holds_dc(const DcLedger& ledger,
                        const std::vector<std::string>& holder_subsystems,
                        const std::string& target,
                        const std::vector<std::string>& target_subsystems);

}  // namespace qdet
