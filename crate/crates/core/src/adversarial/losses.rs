use super::{Operator, Regime};
use crate::nn::{NnError, NodeId, Tape, PROB_FLOOR};

/// `mean s(1 − D)` for the generator's adversarial term. Under the vanilla
/// operator `D` is the sigmoid of the critic output.
fn adversarial_term(tape: &mut Tape, operator: Operator, d_fake: NodeId) -> NodeId {
    match operator {
        Operator::WganGp => {
            let neg = tape.scale(d_fake, -1.0);
            let one_minus = tape.add_scalar(neg, 1.0);
            tape.mean(one_minus)
        }
        Operator::Vanilla => {
            let p = tape.sigmoid(d_fake);
            let neg = tape.scale(p, -1.0);
            let one_minus = tape.add_scalar(neg, 1.0);
            let log = tape.log_floor(one_minus, PROB_FLOOR);
            tape.mean(log)
        }
    }
}

/// Generator loss on rows generated for `classes`: `mean s(1 − D(G))` plus
/// complement CE toward the generating class (AO) or CE toward it (DO).
pub fn generator_loss(
    tape: &mut Tape,
    regime: Regime,
    operator: Operator,
    d_fake: NodeId,
    q_fake: NodeId,
    classes: &[usize],
) -> Result<NodeId, NnError> {
    let complement = match regime {
        Regime::Ao => true,
        Regime::Do => false,
        Regime::Baseline => {
            return Err(NnError::Contract("the baseline regime has no generator".into()))
        }
    };
    let adv = adversarial_term(tape, operator, d_fake);
    let per_row = tape.pick_neg_log(q_fake, classes, complement, PROB_FLOOR)?;
    let cls = tape.mean(per_row);
    tape.add(adv, cls)
}

/// Classifier loss: mean CE on real rows, plus (when generated rows are
/// given) mean CE toward the generating class (AO) or mean complement CE to
/// it (DO). Without generated rows every regime reduces to plain CE.
pub fn classifier_loss(
    tape: &mut Tape,
    regime: Regime,
    q_real: NodeId,
    y_real: &[usize],
    generated: Option<(NodeId, &[usize])>,
) -> Result<NodeId, NnError> {
    let per_row = tape.pick_neg_log(q_real, y_real, false, PROB_FLOOR)?;
    let real = tape.mean(per_row);
    let Some((q_gen, classes)) = generated.filter(|(_, c)| !c.is_empty()) else {
        return Ok(real);
    };
    let complement = match regime {
        Regime::Ao => false,
        Regime::Do => true,
        Regime::Baseline => return Ok(real),
    };
    let per_gen = tape.pick_neg_log(q_gen, classes, complement, PROB_FLOOR)?;
    let gen = tape.mean(per_gen);
    tape.add(real, gen)
}

/// Critic loss to minimize. WGAN-GP: `mean D(fake) − mean D(real)` plus the
/// supplied penalty node. Vanilla: `−mean ln σ(D(real)) − mean ln(1 − σ(D(fake)))`.
pub fn critic_loss(
    tape: &mut Tape,
    operator: Operator,
    d_real: NodeId,
    d_fake: NodeId,
    penalty: Option<NodeId>,
) -> Result<NodeId, NnError> {
    let loss = match operator {
        Operator::WganGp => {
            let f = tape.mean(d_fake);
            let r = tape.mean(d_real);
            tape.sub(f, r)?
        }
        Operator::Vanilla => {
            let pr = tape.sigmoid(d_real);
            let lr = tape.log_floor(pr, PROB_FLOOR);
            let mr = tape.mean(lr);
            let pf = tape.sigmoid(d_fake);
            let neg = tape.scale(pf, -1.0);
            let one_minus = tape.add_scalar(neg, 1.0);
            let lf = tape.log_floor(one_minus, PROB_FLOOR);
            let mf = tape.mean(lf);
            let s = tape.add(mr, mf)?;
            tape.scale(s, -1.0)
        }
    };
    match penalty {
        Some(p) => tape.add(loss, p),
        None => Ok(loss),
    }
}
