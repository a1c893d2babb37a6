import subprocess
import os

OUT_DIR = os.path.join('results', 'reproduction')


def run_script(script_name, *args, is_module=False):
    """Function to run a Python script or module with optional arguments"""
    command = ['python3']
    if is_module:
        command.extend(['-m', script_name])
    else:
        command.append(script_name)
    command.extend(args)
    try:
        subprocess.run(command, check=True)
    except subprocess.CalledProcessError as e:
        print(f"Failed to execute {script_name} with args {args} (exit {e.returncode})")


def cli(name, *args):
    run_script('independence_patterns', '--out-dir', os.path.join(OUT_DIR, name), *args, is_module=True)


def main():
    # published HIV table, once per model
    cli('hiv', 'dataset', 'hiv')
    for model in ('bayes-corr', 'bic', 'bayes-optim'):
        cli(model, 'exact', '--dataset', 'hiv', '--model', model, '--relevance', '4', '--relevance', '12356',
            '--same-block', '356', '--same-block', '12', '--top', '4')

    # sampler agreement with the exact table
    cli('sampler', 'sample', '--dataset', 'hiv', '--model', 'bayes-optim', '--preset', 'gibbs+2wshc+pt',
        '--compare-exact')

    # simulation study and run-to-run comparison
    cli('gaussian', 'simulate', '--dimension', '6', '--k', '1-6', '--model', 'bayes-optim')
    cli('student', 'simulate', '--dimension', '6', '--k', '1-6', '--family', 'student', '--model', 'bayes-optim')
    cli('hiv', 'compare', '--dataset', 'hiv', '--repeats', '5', '--steps', '20000')


if __name__ == "__main__":
    main()
