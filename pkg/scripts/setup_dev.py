#!/usr/bin/env python
"""
Development environment setup script for the attack toolkit.
Creates a virtual environment, installs dependencies, migrates the
ledger database and writes the synthetic fixture worlds.
"""
import os
import shutil
import subprocess
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


def run_command(command, description="", check=True):
    """Run a command and handle errors."""
    print(f"\n{'=' * 60}")
    print(f"Running: {description or command}")
    print(f"{'=' * 60}")

    result = subprocess.run(command, shell=True, capture_output=False)

    if check and result.returncode != 0:
        print(f"\n❌ Command failed: {command}")
        sys.exit(1)
    elif result.returncode == 0:
        print(f"\n✅ Command succeeded: {description or command}")

    return result.returncode == 0


def venv_tool(name):
    """Path of ``name`` inside the virtual environment, or the bare name."""
    folder = "Scripts" if os.name == 'nt' else "bin"
    path = project_root / "venv" / folder / name
    return str(path) if path.exists() else name


def check_python_version():
    print("🐍 Checking Python version...")

    version = sys.version_info
    if version.major == 3 and version.minor >= 10:
        print(f"✅ Python {version.major}.{version.minor}.{version.micro} is compatible")
        return True
    print(f"❌ Python {version.major}.{version.minor}.{version.micro} is not compatible")
    print("This project requires Python 3.10 or higher")
    return False


def setup_virtual_environment():
    print("📦 Setting up virtual environment...")

    venv_path = project_root / "venv"
    if venv_path.exists():
        print("Virtual environment already exists")
        return True
    return run_command(f"{sys.executable} -m venv {venv_path}", "Creating virtual environment")


def install_python_dependencies():
    print("📦 Installing Python dependencies...")

    requirements_file = project_root / "requirements.txt"
    if not requirements_file.exists():
        print("❌ requirements.txt not found")
        return False

    pip_cmd = venv_tool("pip")
    run_command(f"{pip_cmd} install --upgrade pip", "Upgrading pip")
    run_command(f"{pip_cmd} install -r {requirements_file}", "Installing project dependencies")
    return True


def setup_environment_file():
    """Write a minimal .env when none exists."""
    print("⚙️ Setting up environment configuration...")

    env_file = project_root / ".env"
    if env_file.exists():
        print(".env file already exists")
        return True

    try:
        from django.core.management.utils import get_random_secret_key
        secret_key = get_random_secret_key()
    except ImportError:
        print("⚠️ Django not installed yet, SECRET_KEY will need to be set manually")
        secret_key = 'change-me'

    env_file.write_text(
        f"SECRET_KEY={secret_key}\n"
        "DEBUG=True\n"
        "TOOLKIT_SEED=13\n"
        "TOOLKIT_ARTIFACT_DIR=artifacts\n",
        encoding='utf-8',
    )
    print("✅ Created .env")
    return True


def setup_database():
    """Migrate the experiment ledger database."""
    print("🗄️ Setting up database...")
    os.chdir(project_root)
    run_command(f"{venv_tool('python')} manage.py migrate", "Running database migrations")
    return True


def seed_fixture_worlds():
    print("📊 Writing synthetic fixture worlds...")
    run_command(
        f"{venv_tool('python')} manage.py seed_fixtures fixtures/worlds --seed 13",
        "Seeding fixture worlds",
    )


def setup_pre_commit():
    print("🔨 Setting up pre-commit hooks...")

    if (project_root / ".pre-commit-config.yaml").exists():
        run_command(f"{venv_tool('pre-commit')} install", "Installing pre-commit hooks", check=False)
    else:
        print("⚠️ .pre-commit-config.yaml not found, skipping pre-commit setup")


def display_success_message():
    print("\n" + "=" * 60)
    print("SUCCESS! Development environment setup complete!")
    print("=" * 60)

    print("\n📋 NEXT STEPS:")
    print("1. Activate the virtual environment:")
    print("   venv\\Scripts\\activate.bat" if os.name == 'nt' else "   source venv/bin/activate")

    print("\n2. Train a victim on the word world:")
    print("   python manage.py train_victim --embeddings fixtures/worlds/word_embeddings.txt \\")
    print("       --dataset fixtures/worlds/word_dataset.csv --lexicon fixtures/worlds/word_lexicon.tsv")

    print("\n3. Useful commands:")
    print("   • Run tests: python scripts/run_tests.py all")
    print("   • Fast tests: python scripts/run_tests.py fast")
    print("   • Linting: python -m ruff check apps/ tests/")


def main():
    print("🏗️ Attack Toolkit - Development Setup")
    print("=" * 60)

    os.chdir(project_root)

    if not check_python_version():
        sys.exit(1)
    if not shutil.which("git"):
        print("⚠️ git not found")
    if not setup_virtual_environment():
        sys.exit(1)
    if not install_python_dependencies():
        sys.exit(1)
    if not setup_environment_file():
        sys.exit(1)
    if not setup_database():
        sys.exit(1)

    print("\n❓ Would you like to write the synthetic fixture worlds? (y/n): ", end="")
    if input().lower().startswith('y'):
        seed_fixture_worlds()

    setup_pre_commit()
    display_success_message()


if __name__ == "__main__":
    main()
