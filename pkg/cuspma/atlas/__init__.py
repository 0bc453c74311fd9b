from cuspma.atlas.charts import (QuasiChart, CoveringSequence, quasi_map, pullback_weight,
                                 pullback_metric, pullback_metric_fd, covering_sequence,
                                 image_disc, image_s_range)
from cuspma.atlas.sobolev import (chart_sum_integral, bracket_constant, integrand_registry,
                                  sobolev_ratio, sobolev_family_probe, sup_bound_probe,
                                  BumpTestField, bump_family)
from cuspma.atlas.holder import qc_holder_norm, qc_holder_family
