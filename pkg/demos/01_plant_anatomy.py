"""Walk through the thermal plant: Peltier coefficients, network, steady states.

Run: python3 demos/01_plant_anatomy.py
"""
from thermoshell.calibration import calibrated_config
from thermoshell.peltier import PeltierSpecs, derive_peltier_coefficients, face_heat_flows
from thermoshell.simulator import Plant

specs = PeltierSpecs()
params = derive_peltier_coefficients(specs)
print("Peltier module from its datasheet maxima")
print(f"  Seebeck {params.seebeck:.5f} V/K, resistance {params.resistance:.4f} ohm, "
      f"conductance {params.thermal_conductance:.4f} W/K")
th = specs.hot_side_ref_temp - 273.15
q_cold, _ = face_heat_flows(params, specs.i_max, th, th)
print(f"  heat pumped at I_max with no temperature difference: {q_cold:.1f} W (datasheet says {specs.q_max} W)"
      "\n  the max-spec relations overshoot the datasheet cooling capacity by about 6 %")

plant = Plant(calibrated_config())
print(f"\nThermal network: {plant.n} nodes, {int(plant.dynamic.sum())} with heat capacity")
flow = plant.flow_for(plant.config.pump.v_max)
print(f"Full pump flow: {flow * 6e7:.1f} ml/min")
for face in (12.0, 22.0, 50.0, 77.0):
    temps = plant.steady_state(face, flow)
    print(f"  faces at {face:4.1f} degC -> surface {temps[plant.idx['surface']]:5.2f} degC, "
          f"tank {temps[plant.idx['tank']]:5.2f} degC")
