#ifndef ISOPROJ_H
#define ISOPROJ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  ISO_STATUS_OK = 0,
  ISO_STATUS_NULL_POINTER = 1,
  ISO_STATUS_INVALID_ARGUMENT = 2,
  ISO_STATUS_PARSE_ERROR = 3,
  ISO_STATUS_EVAL_ERROR = 4,
  ISO_STATUS_TESSELLATION_ERROR = 5,
  ISO_STATUS_IO_ERROR = 6,
  ISO_STATUS_PANIC = 7,
} IsoStatus;

/**
 * Opaque scalar field.
 */
typedef struct IsoField IsoField;

/**
 * Opaque triangle mesh.
 */
typedef struct IsoMesh IsoMesh;

typedef struct {
  double x;
  double y;
  double z;
} IsoVec3;

/**
 * Octree tessellation settings; start from [`iso_tessellate_params_default`].
 */
typedef struct {
  IsoVec3 min;
  IsoVec3 max;
  /**
   * Uniform octree depth.
   */
  uint32_t depth;
  /**
   * Domain resolution r.
   */
  uint32_t resolution;
  /**
   * Nonzero selects the transfinite base instead of corners only.
   */
  uint32_t transfinite;
  /**
   * Rejection threshold in degrees.
   */
  double angle_threshold;
} IsoTessellateParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *iso_last_error(void);

/**
 * Parses a field expression such as `x^2+y^2+z^2-1`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
IsoStatus iso_field_parse(const char *source, IsoField **out);

/**
 * Builds a built-in field such as `sphere(1)` or `torus(2,1)`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
IsoStatus iso_field_builtin(const char *spec, IsoField **out);

/**
 * # Safety
 * `field` must come from this library and `out` be valid.
 */
IsoStatus iso_field_eval(const IsoField *field, IsoVec3 p, double *out);

/**
 * # Safety
 * `field` must come from this library and `out` be valid.
 */
IsoStatus iso_field_gradient(const IsoField *field, IsoVec3 p, IsoVec3 *out);

/**
 * # Safety
 * `field` must come from this library or be NULL; it is invalid afterwards.
 */
void iso_field_free(IsoField *field);

/**
 * Unit-sphere-sized defaults: box [-1.5, 1.5]^3, depth 2, r = 4, corners
 * base, 80 degree threshold.
 */
IsoTessellateParams iso_tessellate_params_default(void);

/**
 * Tessellates over a uniform octree. Accepted patches form `*out`; the
 * number of rejected cells goes to `rejected` when it is not NULL.
 *
 * # Safety
 * `field`, `params` and `out` must be valid; `rejected` may be NULL.
 */
IsoStatus iso_tessellate(const IsoField *field,
                         const IsoTessellateParams *params,
                         IsoMesh **out,
                         size_t *rejected);

/**
 * Marching Cubes on a regular grid.
 *
 * # Safety
 * `field` and `out` must be valid.
 */
IsoStatus iso_marching_cubes(const IsoField *field,
                             IsoVec3 min,
                             IsoVec3 max,
                             double spacing,
                             IsoMesh **out);

/**
 * # Safety
 * `mesh` must come from this library.
 */
size_t iso_mesh_vertex_count(const IsoMesh *mesh);

/**
 * # Safety
 * `mesh` must come from this library.
 */
size_t iso_mesh_triangle_count(const IsoMesh *mesh);

/**
 * Copies `3 * vertex_count` coordinates, xyz per vertex, into `out`.
 *
 * # Safety
 * `out` must have room for `len` doubles.
 */
IsoStatus iso_mesh_positions(const IsoMesh *mesh, double *out, size_t len);

/**
 * Copies `3 * triangle_count` zero-based vertex indices into `out`.
 *
 * # Safety
 * `out` must have room for `len` integers.
 */
IsoStatus iso_mesh_triangles(const IsoMesh *mesh, uint32_t *out, size_t len);

/**
 * Writes OBJ or ASCII PLY, chosen by the file extension.
 *
 * # Safety
 * `mesh` must come from this library and `path` be NUL-terminated.
 */
IsoStatus iso_mesh_write(const IsoMesh *mesh, const char *path);

/**
 * # Safety
 * `mesh` must come from this library or be NULL; it is invalid afterwards.
 */
void iso_mesh_free(IsoMesh *mesh);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISOPROJ_H */
