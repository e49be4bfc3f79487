/* chiral_smatrix: C interface to the chiral-channel scattering library.
 *
 * Closed-form one- and two-photon scattering amplitudes of multi-level
 * emitters coupled to a unidirectional photonic channel, the outgoing state
 * of a coherent rectangular pulse, and a discretized-Hamiltonian oracle for
 * cross-validation.
 *
 * Conventions: energies and momenta are measured in units of the reference
 * half-width Gamma_ref = pi * g_ref^2 (a coupling g entered here contributes
 * an elastic half-width pi * g^2 in these units), the channel is strictly
 * unidirectional with unit group velocity, and two-photon kernels carry one
 * inverse energy.
 *
 * All functions returning csm_status never throw; on failure they return a
 * nonzero code and record a human-readable message retrievable with
 * csm_last_error() (per thread, valid until the next failing call).
 * Constructor-style functions return NULL on failure and record the message
 * the same way.  Handles are single-owner and freed with the matching
 * csm_*_free function; NULL is always safe to free.
 */
#ifndef CHIRAL_SMATRIX_H
#define CHIRAL_SMATRIX_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum csm_status {
  CSM_OK = 0,
  CSM_ERR_INVALID_ARGUMENT = 1,
  CSM_ERR_EMPTY_CHAIN = 2,
  CSM_ERR_DUPLICATE_POSITION = 3,
  CSM_ERR_UNEQUAL_DETUNINGS = 4,
  CSM_ERR_OFF_SHELL = 5,
  CSM_ERR_UNORDERED_COORDINATES = 6,
  CSM_ERR_TRUNCATION_EXCEEDED = 7,
  CSM_ERR_QUADRATURE = 8,
  CSM_ERR_UNSUPPORTED_SPEC = 9,
  CSM_ERR_PACKET_NOT_SEPARATED = 10,
  CSM_ERR_STEP_CONTROL = 11,
  CSM_ERR_ALLOC = 12,
  CSM_ERR_INTERNAL = 13
} csm_status;

typedef struct csm_complex {
  double re;
  double im;
} csm_complex;

/* Library version string, e.g. "1.0.0". */
const char* csm_version(void);

/* Message of the most recent failure on the calling thread ("" if none). */
const char* csm_last_error(void);

/* ----------------------------------------------------------------------- */
/* Emitters                                                                 */
/* ----------------------------------------------------------------------- */

typedef struct csm_emitter csm_emitter;

csm_emitter* csm_emitter_two_level(double omega, double g);
csm_emitter* csm_emitter_non_rwa(double omega, double g, double gprime);
csm_emitter* csm_emitter_dicke(int m, double omega, double g);
csm_emitter* csm_emitter_lambda(double eps1, double eps2, double eps3,
                                double g31, double g32);
csm_emitter* csm_emitter_vscheme(double eps1, double eps2, double eps3,
                                 double g21, double g31);
csm_emitter* csm_emitter_sigma(double eps1, double eps2, double eps3,
                               double g21, double g32);
void csm_emitter_free(csm_emitter* emitter);

/* Dressed pole alpha, elastic half-width gamma and -- when the family has a
 * second dressed pole (Dicke collective rung, V doublet partner) -- that
 * second pole with *has_second = 1. */
csm_status csm_derive_params(const csm_emitter* emitter, csm_complex* alpha,
                             double* gamma, csm_complex* second_pole,
                             int* has_second);

/* ----------------------------------------------------------------------- */
/* Chains                                                                   */
/* ----------------------------------------------------------------------- */

typedef struct csm_chain csm_chain;

csm_chain* csm_chain_new(int concentrated);
csm_status csm_chain_add(csm_chain* chain, const csm_emitter* emitter,
                         double position);
csm_status csm_chain_validate(const csm_chain* chain);
void csm_chain_free(csm_chain* chain);

/* ----------------------------------------------------------------------- */
/* Single-photon amplitudes (pole_guard <= 0 selects the default 1e-10)     */
/* ----------------------------------------------------------------------- */

csm_status csm_s1_emitter(const csm_emitter* emitter, double p,
                          double pole_guard, csm_complex* s, int* flagged);

csm_status csm_s1_chain(const csm_chain* chain, double p, double pole_guard,
                        csm_complex* s, int* flagged);

/* Lambda channel matrix: channels[2*out + in] (0-based channel indices),
 * outgoing momenta p_out[out] = p + eps_in - eps_out, and the elastic
 * amplitude for staying in `incoming_channel` (1 or 2). */
csm_status csm_s1_lambda(const csm_emitter* emitter, double p,
                         int incoming_channel, double pole_guard,
                         csm_complex channels[4], double p_out[2],
                         csm_complex* elastic, int* flagged);

/* ----------------------------------------------------------------------- */
/* Two-photon connected kernels (on-shell: p1 + p2 = k1 + k2)               */
/* ----------------------------------------------------------------------- */

/* Connected kernel of a supported system: single two-level emitter, Dicke
 * cluster, or two separated two-level emitters. */
csm_status csm_t2_kernel(const csm_chain* chain, double p1, double p2,
                         double k1, double k2, double pole_guard,
                         csm_complex* t, int* flagged);

/* Dicke kernel evaluated with the unsimplified excitation bracket and with
 * the commonly quoted simplified bracket; the difference vanishes only at
 * zero transition frequency.  Accepts a Dicke or two-level emitter. */
csm_status csm_t2_dicke_forms(const csm_emitter* emitter, double p1, double p2,
                              double k1, double k2, double pole_guard,
                              csm_complex* bracket_form,
                              csm_complex* simplified_form);

/* Ordered composition of two single-emitter kernels along the channel;
 * `quadrature_route` != 0 evaluates the exchange integral by adaptive
 * quadrature instead of the closed form. */
csm_status csm_s2_convolve(const csm_emitter* downstream,
                           const csm_emitter* upstream, double p1, double p2,
                           double k1, double k2, int quadrature_route,
                           csm_complex* downstream_dressed,
                           csm_complex* upstream_dressed,
                           csm_complex* exchange, csm_complex* total,
                           double* quadrature_error);

/* Intermediate pair propagation integral
 * I(E) = Int dk' M_a(k') M_a(E-k') M_b(k') M_b(E-k'). */
csm_status csm_intermediate_pair_integral(const csm_emitter* a,
                                          const csm_emitter* b, double e_total,
                                          int quadrature_route,
                                          csm_complex* value, double* error,
                                          int* evaluations);

/* Kernel poles in the complex total-energy plane within the disk
 * |E - center| <= radius.  kinds[i]: 0 = single-photon, 1 = pair bound,
 * 2 = collective.  Fails with CSM_ERR_INVALID_ARGUMENT when more than
 * `capacity` poles fall inside the window. */
csm_status csm_locate_poles(const csm_chain* chain, double delta,
                            double delta_prime, csm_complex window_center,
                            double window_radius, csm_complex* locations,
                            int* kinds, int capacity, int* count);

/* ----------------------------------------------------------------------- */
/* Coherent pulse through a single two-level emitter                        */
/* ----------------------------------------------------------------------- */

typedef struct csm_coherent csm_coherent;

/* Rectangular pulse of length box_length occupying the mode of momentum k
 * with coherent amplitude alpha (mean photon number |alpha|^2), scattered by
 * a two-level emitter; amplitudes are truncated at n_max <= 4 photons. */
csm_coherent* csm_coherent_new(double k, double alpha_re, double alpha_im,
                               double box_length, double omega, double g,
                               int n_max);
void csm_coherent_free(csm_coherent* state);

/* Connected n-photon cluster amplitude at ordered coordinates. */
csm_status csm_coherent_cluster(const csm_coherent* state, const double* xs,
                                int n, csm_complex* value, int* flagged);

/* Full n-photon coefficient (displaced cluster expansion). */
csm_status csm_coherent_amplitude(const csm_coherent* state, const double* xs,
                                  int n, csm_complex* value, int* flagged);

/* Photon-number weights w_0..w_n_max of the transmitted field plus
 * quadrature error estimates; capacity must be at least n_max + 1. */
csm_status csm_coherent_statistics(const csm_coherent* state, double* weights,
                                   double* errors, int capacity, int* count,
                                   double* nbar);

/* Normalized full-field pair correlation g2(x1, x2). */
csm_status csm_coherent_g2(const csm_coherent* state, double x1, double x2,
                           double* value, int* flagged);

/* ----------------------------------------------------------------------- */
/* Discretized-Hamiltonian oracle (JSON in / JSON out)                      */
/* ----------------------------------------------------------------------- */

/* config_json: {"system": {"emitters": [{"type": "two_level", "omega": 0,
 *   "g": 1, "position": 0}, ...], "concentrated": false}, "k_center": 0,
 *   "incoming_channel": 1, "discretization": {"n_modes": 256, ...}}.
 * All parameters are in the internal Gamma_ref units.  On success
 * *result_json receives a newly allocated document; free it with
 * csm_string_free. */
csm_status csm_oracle_s1_run(const char* config_json, char** result_json);
csm_status csm_oracle_s2_run(const char* config_json, char** result_json);
void csm_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CHIRAL_SMATRIX_H */
