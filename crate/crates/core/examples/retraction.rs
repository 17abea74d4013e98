//! Preparing a qbit from a bit and measuring it back is the identity on bits;
//! the other way round it dephases.

use qpl::qcat::{dephasing, qbit_structure};
use qpl::{QArrow, Signature};

fn main() -> qpl::Result<()> {
    let (qbit, iota, p) = qbit_structure();
    println!("qbit = {qbit}, iota: {} -> {}, p: {} -> {}", iota.source(), iota.target(), p.source(), p.target());

    let round_trip = QArrow::compose(&p, &iota)?;
    let d = round_trip.max_choi_distance(&QArrow::identity(&Signature::bit()))?;
    println!("p ∘ iota vs id_bit: max Choi distance {d:e}");

    let deph = QArrow::compose(&iota, &p)?;
    println!("iota ∘ p Choi matrix:\n{:?}", deph.block(0, 0)?.choi().matrix);
    println!("equal to the dephasing channel: {}", deph.max_choi_distance(&dephasing())? == 0.0);
    Ok(())
}
