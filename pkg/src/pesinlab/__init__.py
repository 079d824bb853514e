"""C^1 expanding circle and torus maps with positive-measure Cantor sets, and the
entropy, Lyapunov and weak* machinery to test the entropy formula on them."""

__version__ = "0.1.0"

from .builders import (  # noqa: E402
    BuiltSystem,
    build_doubling,
    build_example1,
    build_example2,
    build_from_config,
    build_reference_affine,
    build_torus,
    gap_image_check,
)
from .cantor import (  # noqa: E402
    BowenParams,
    CantorSkeleton,
    atom_interval,
    build_skeleton,
    cantor_total_measure,
    gap_interval,
    locate,
    mu_K_cylinder,
    sample_mu_K,
)
from .entropy import (  # noqa: E402
    CylinderTable,
    PesinReport,
    atom_mass_decay,
    birkhoff_lyapunov,
    cylinder_table_empirical,
    cylinder_table_symbolic,
    distortion_ratio,
    entropy_rate,
    lyapunov_integral,
    partition_entropy,
    pesin_defect,
)
from .measures import (  # noqa: E402
    CantorBernoulli,
    Dirac,
    Empirical,
    LebesgueUniform,
    ObservableFamily,
    Product,
    empirical_from_orbit,
    integrate,
    product_measure,
    pushforward,
    weak_star_dist,
)
from .parallel import run_parallel  # noqa: E402
from .piecewise_map import (  # noqa: E402
    CircleMap,
    MonotonePiece,
    TorusMap,
    itinerary,
    make_piece,
    map_deriv,
    map_eval,
    orbit,
    piece_deriv,
    piece_eval,
    torus_eval,
    torus_log_det,
    validate_circle_map,
)
