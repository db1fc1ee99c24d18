//! Shows why offset compensation buys transimpedance gain: with a 50 uA
//! offset the uncompensated TIA rails just above 33 kOhm, while the
//! compensated path walks the RF ladder all the way up.

use ppg_afe_sim::afe::{FrontEnd, FrontEndConfig};
use ppg_afe_sim::converters::IdacSpec;

fn main() {
    let offset = 50e-6;

    println!("uncompensated TIA, 50 uA offset (headroom = 1.65 V -> rails at 33 kOhm):");
    let mut fe = FrontEnd::new(FrontEndConfig::default_3v3()).unwrap();
    for code in [0u32, 8, 16, 32, 64, 128, 255] {
        fe.state.rf_code = code;
        let v = fe.tia_output(offset);
        println!(
            "  rf code {code:>3} ({:>9.0} Ohm): v_out {v:.3} V{}",
            fe.cfg.rf_ohms(code),
            if fe.state.saturated { "  SATURATED" } else { "" }
        );
    }

    println!("\nwith the 7-bit iDAC sinking its closest code to 50 uA:");
    let mut cfg = FrontEndConfig::default_3v3();
    cfg.idac_spec = IdacSpec::soc_7bit();
    let mut fe = FrontEnd::new(cfg).unwrap();
    fe.state.idac_code = fe.cfg.idac_spec.code_for(offset);
    fe.state.s1_closed = true;
    for code in [0u32, 64, 128, 255] {
        fe.state.rf_code = code;
        let v = fe.tia_output(offset);
        println!(
            "  rf code {code:>3} ({:>9.0} Ohm): v_out {v:.3} V{}",
            fe.cfg.rf_ohms(code),
            if fe.state.saturated { "  SATURATED" } else { "" }
        );
    }

    println!("\nwith the 8-bit full-range iDAC (39 uA quantization step):");
    let mut fe = FrontEnd::new(FrontEndConfig::default_3v3()).unwrap();
    fe.state.idac_code = fe.cfg.idac_spec.code_for(offset);
    fe.state.s1_closed = true;
    let residual = offset - fe.cfg.idac_spec.current(fe.state.idac_code);
    println!("  residual after coarse step: {:+.2} uA", residual * 1e6);
    for code in [0u32, 32, 42, 43, 64, 255] {
        fe.state.rf_code = code;
        let v = fe.tia_output(offset);
        println!(
            "  rf code {code:>3} ({:>9.0} Ohm): v_out {v:.3} V{}",
            fe.cfg.rf_ohms(code),
            if fe.state.saturated { "  SATURATED" } else { "" }
        );
    }
}
